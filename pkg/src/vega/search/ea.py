"""(mu + 1) evolutionary search with the Pareto archive as population."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..sampler import EncodedSample, decode_sample, derive_seed, make_rng, sample
from ..space import SearchSpace
from .pareto import ParetoArchive
from .trial import Objective, Trial, TrialResult

__all__ = ["mutate", "ea_step", "EvolutionSearch"]


def mutate(
    encoded: EncodedSample,
    rng: np.random.Generator,
    mutation_rate: float,
    sigma: float = 0.1,
    other: EncodedSample | None = None,
) -> EncodedSample:
    """Resample each coordinate with prob. ``mutation_rate``, else Gaussian-jitter it.

    With ``other`` given, each coordinate is first taken from either parent
    with equal probability (uniform crossover).
    """
    coords = {}
    for key, values in encoded.coords.items():
        vec = np.asarray(values, dtype=float)
        if other is not None:
            pick = rng.random(vec.size) < 0.5
            vec = np.where(pick, vec, np.asarray(other.coords[key], dtype=float))
        resample = rng.random(vec.size) < mutation_rate
        fresh = rng.random(vec.size)
        jitter = np.clip(vec + rng.normal(0.0, 1.0, vec.size) * sigma, 0.0, 1.0)
        coords[key] = tuple(float(v) for v in np.where(resample, fresh, jitter))
    return EncodedSample(coords)


def ea_step(
    archive: ParetoArchive,
    space: SearchSpace,
    rng_seed: int,
    mutation_rate: float,
    *,
    sigma: float = 0.1,
    crossover: bool = False,
    trial_id: int = 0,
    resource: int = 1,
) -> Trial:
    """Child of a uniformly chosen archive member (random trial when the archive is empty)."""
    if len(archive) == 0:
        encoded, config = sample(space, rng_seed)
        return Trial(trial_id, config, encoded, resource)
    rng = make_rng(rng_seed)
    parent = archive.entries[int(rng.integers(len(archive)))]
    other = archive.entries[int(rng.integers(len(archive)))].encoded if crossover else None
    child = mutate(parent.encoded, rng, mutation_rate, sigma, other)
    config = decode_sample(space, child, {"seed": int(rng_seed), "sampler": "ea"})
    return Trial(trial_id, config, child, resource, parent_trial=parent.trial_id)


class EvolutionSearch:
    """Random initial population, then one mutated child per ask."""

    def __init__(
        self,
        space: SearchSpace,
        objectives: Sequence[Objective],
        *,
        seed: int = 0,
        population: int = 8,
        mutation_rate: float = 0.2,
        sigma: float = 0.1,
        crossover: bool = False,
        resource: int = 1,
        num_samples: int | None = None,
    ):
        self.space = space
        self.objectives = tuple(objectives)
        self.archive = ParetoArchive(tuple(o.mode for o in self.objectives))
        self.seed = seed
        self.population = population
        self.mutation_rate = mutation_rate
        self.sigma = sigma
        self.crossover = crossover
        self.resource = resource
        self.num_samples = num_samples
        self._count = 0

    def ask(self) -> Trial | None:
        if self.num_samples is not None and self._count >= self.num_samples:
            return None
        tid = self._count
        self._count += 1
        seed = derive_seed(self.seed, "ea", tid)
        if tid < self.population:
            encoded, config = sample(self.space, seed)
            return Trial(tid, config, encoded, self.resource)
        return ea_step(self.archive, self.space, seed, self.mutation_rate, sigma=self.sigma,
                       crossover=self.crossover, trial_id=tid, resource=self.resource)

    def tell(self, trial: Trial, result: TrialResult) -> None:
        if not result.ok or any(o.metric not in result.metrics for o in self.objectives):
            return
        values = tuple(float(result.metrics[o.metric]) for o in self.objectives)
        self.archive.insert(trial.sample, values, encoded=trial.encoded, trial_id=trial.trial_id)
