"""Uniform random search."""

from __future__ import annotations

from ..sampler import derive_seed, sample
from ..space import SearchSpace
from .trial import Trial, TrialResult

__all__ = ["propose_random", "RandomSearch"]


def _random_trial(space: SearchSpace, rng_seed: int, index: int, resource: int) -> Trial:
    encoded, config = sample(space, derive_seed(rng_seed, "random", index))
    return Trial(index, config, encoded, resource, 0)


def propose_random(space: SearchSpace, rng_seed: int, n: int, r0: int = 1) -> list[Trial]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return [_random_trial(space, rng_seed, i, r0) for i in range(n)]


class RandomSearch:
    def __init__(self, space: SearchSpace, *, seed: int = 0, resource: int = 1, num_samples: int | None = None):
        self.space = space
        self.seed = seed
        self.resource = resource
        self.num_samples = num_samples
        self._count = 0

    def ask(self) -> Trial | None:
        if self.num_samples is not None and self._count >= self.num_samples:
            return None
        trial = _random_trial(self.space, self.seed, self._count, self.resource)
        self._count += 1
        return trial

    def tell(self, trial: Trial, result: TrialResult) -> None:
        pass
