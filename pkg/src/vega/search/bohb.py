"""BOHB-lite: a TPE-style density-ratio model inside Hyperband brackets.

The model works on the encoded unit cube.  Observations at one fidelity are
split into a good and a bad set by rank; each set gets a factored Gaussian
KDE (one univariate KDE per coordinate, Scott bandwidth ``std * n**-0.2``
floored at ``min_bandwidth``, where ``std`` is the spread of all observations at
that fidelity and ``n`` the size of the set).  Both densities mix in the uniform prior on the
cube with the weight of ``prior_weight`` kernels, which keeps a collapsed good
set from freezing the search.  Candidates are drawn from the good model and
the one with the largest ``l(x) / g(x)`` wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from ..sampler import EncodedSample, decode_sample, derive_seed, encoding_dim, make_rng, sample, space_dim
from ..space import SearchSpace
from .trial import Objective, Trial, TrialResult

__all__ = [
    "BohbConfig",
    "BracketState",
    "hyperband_brackets",
    "split_good_bad",
    "bohb_propose",
    "BohbSearch",
]


@dataclass(frozen=True)
class BohbConfig:
    gamma: float = 0.15
    n_candidates: int = 24
    min_bandwidth: float = 1e-3
    bandwidth_factor: float = 1.0
    prior_weight: float = 1.0


@dataclass(frozen=True)
class BracketState:
    bracket: int = 0
    rung: int = 0
    resource: int = 1


def hyperband_brackets(eta: int, r_min: int, r_max: int) -> list[list[tuple[int, int]]]:
    """Successive-halving brackets as ``[(n_configs, resource), ...]`` per rung, most aggressive first."""
    s_max = 0
    while r_min * eta ** (s_max + 1) <= r_max:
        s_max += 1
    brackets = []
    for s in range(s_max, -1, -1):
        n = int(math.ceil((s_max + 1) / (s + 1) * eta**s))
        rungs = []
        for i in range(s + 1):
            rungs.append((max(1, n // eta**i), r_min * eta ** (s_max - s + i)))
        brackets.append(rungs)
    return brackets


def _normalize_history(history, default_resource: int) -> list[tuple[np.ndarray, float, int]]:
    out = []
    for item in history:
        encoded, score = item[0], item[1]
        resource = item[2] if len(item) > 2 else default_resource
        vec = encoded.vector() if isinstance(encoded, EncodedSample) else np.asarray(encoded, dtype=float)
        out.append((vec, float(score), int(resource)))
    return out


def split_good_bad(scores: Sequence[float], dim: int, gamma: float) -> tuple[list[int], list[int]]:
    """Indices of the good and bad sets.

    ``|good| = min(max(ceil(gamma * n), dim + 1), n - 1)``; ranking is by score
    (higher better), ties keep history order.
    """
    n = len(scores)
    n_good = min(max(int(math.ceil(gamma * n)), dim + 1), n - 1)
    order = sorted(range(n), key=lambda i: -scores[i])
    return order[:n_good], order[n_good:]


def _bandwidths(spread: np.ndarray, n: int, floor: float) -> np.ndarray:
    return np.maximum(spread * n ** (-1.0 / 5.0), floor)


def _log_density(points: np.ndarray, centers: np.ndarray, bw: np.ndarray, prior_weight: float) -> np.ndarray:
    # Factored: sum over coordinates of the log of each univariate KDE, each
    # mixed with a uniform prior on [0, 1] worth ``prior_weight`` kernels.
    z = (points[:, None, :] - centers[None, :, :]) / bw
    per_dim = np.exp(-0.5 * z**2) / (bw * math.sqrt(2 * math.pi))
    mixed = (per_dim.sum(axis=1) + prior_weight) / (centers.shape[0] + prior_weight)
    return np.log(np.maximum(mixed, 1e-300)).sum(axis=1)


def bohb_propose(
    history,
    space: SearchSpace,
    bracket_state: BracketState | None = None,
    rng_seed: int = 0,
    *,
    config: BohbConfig = BohbConfig(),
    trial_id: int = 0,
) -> Trial:
    """Propose one trial from ``history`` of ``(encoded, score[, resource])`` items.

    Scores are higher-is-better.  The model is fitted at the largest resource
    holding at least ``D + 1`` observations (``D`` = encoded dimension); with
    no such fidelity the proposal is uniform random.
    """
    bracket_state = bracket_state or BracketState()
    dim = space_dim(space)
    obs = [o for o in _normalize_history(history, bracket_state.resource) if math.isfinite(o[1])]
    by_resource: dict[int, list] = {}
    for o in obs:
        by_resource.setdefault(o[2], []).append(o)
    usable = [r for r, items in by_resource.items() if len(items) >= dim + 1 and len(items) >= 2]

    def make(encoded: EncodedSample, provenance: dict) -> Trial:
        config_sample = decode_sample(space, encoded, provenance)
        return Trial(trial_id, config_sample, encoded, bracket_state.resource, bracket_state.rung,
                     bracket_state.bracket)

    if dim == 0 or not usable:
        encoded, _ = sample(space, rng_seed)
        return make(encoded, {"seed": int(rng_seed), "sampler": "bohb-random"})

    items = by_resource[max(usable)]
    x = np.stack([o[0] for o in items])
    good, bad = split_good_bad([o[1] for o in items], dim, config.gamma)
    xg, xb = x[good], x[bad]
    # Spread comes from every observation at this fidelity so a tight good set
    # cannot shrink its own bandwidth to the floor.
    spread = x.std(axis=0, ddof=1)
    bw_g = _bandwidths(spread, len(xg), config.min_bandwidth)
    bw_b = _bandwidths(spread, len(xb), config.min_bandwidth)

    rng = make_rng(rng_seed)
    centers = xg[rng.integers(0, len(xg), size=config.n_candidates)]
    scale = bw_g * config.bandwidth_factor
    lo, hi = (0.0 - centers) / scale, (1.0 - centers) / scale
    candidates = stats.truncnorm.rvs(lo, hi, loc=centers, scale=scale, random_state=rng)
    candidates = np.clip(np.atleast_2d(candidates).reshape(config.n_candidates, dim), 0.0, 1.0)
    # Each coordinate comes from the prior component with its mixture weight.
    from_prior = rng.random(candidates.shape) < config.prior_weight / (len(xg) + config.prior_weight)
    candidates = np.where(from_prior, rng.random(candidates.shape), candidates)
    ratio = (_log_density(candidates, xg, bw_g, config.prior_weight)
             - _log_density(candidates, xb, bw_b, config.prior_weight))
    best = candidates[int(np.argmax(ratio))]

    coords, offset = {}, 0
    for key, width in ((p.key, encoding_dim(p)) for p in space.params):
        coords[key] = tuple(float(v) for v in best[offset:offset + width])
        offset += width
    return make(EncodedSample(coords), {"seed": int(rng_seed), "sampler": "bohb-model"})


class BohbSearch:
    """Hyperband brackets run synchronously, new configurations from :func:`bohb_propose`."""

    def __init__(
        self,
        space: SearchSpace,
        *,
        seed: int = 0,
        eta: int = 3,
        r_min: int = 1,
        r_max: int = 27,
        objective: Objective | None = None,
        config: BohbConfig = BohbConfig(),
    ):
        self.space = space
        self.seed = seed
        self.eta = eta
        self.objective = objective or Objective()
        self.config = config
        self.brackets = hyperband_brackets(eta, r_min, r_max)
        self.history: list[tuple[EncodedSample, float, int]] = []
        self._next_id = 0
        self._bracket_index = 0
        self._rung = 0
        self._queue: list[Trial] = []
        self._outstanding: dict[int, Trial] = {}
        self._finished: list[tuple[Trial, float]] = []
        self._trials: dict[int, Trial] = {}
        self._start_rung()

    @property
    def _bracket(self) -> list[tuple[int, int]]:
        return self.brackets[self._bracket_index % len(self.brackets)]

    def _new_id(self) -> int:
        tid = self._next_id
        self._next_id += 1
        return tid

    def _start_rung(self) -> None:
        n, resource = self._bracket[self._rung]
        state = BracketState(self._bracket_index, self._rung, resource)
        if self._rung == 0:
            for _ in range(n):
                tid = self._new_id()
                trial = bohb_propose(self.history, self.space, state, rng_seed=_seed(self.seed, tid),
                                     config=self.config, trial_id=tid)
                self._queue.append(trial)
        else:
            ranked = sorted(self._finished, key=lambda e: (-e[1], e[0].trial_id))[:n]
            for parent, _ in ranked:
                self._queue.append(Trial(self._new_id(), parent.sample, parent.encoded, resource, self._rung,
                                         self._bracket_index, parent_trial=parent.trial_id))
        self._finished = []

    def ask(self) -> Trial | None:
        if not self._queue:
            return None
        trial = self._queue.pop(0)
        self._outstanding[trial.trial_id] = trial
        self._trials[trial.trial_id] = trial
        return trial

    def tell(self, trial: Trial, result: TrialResult) -> None:
        self._outstanding.pop(trial.trial_id, None)
        score = self.objective.score(result)
        self.history.append((trial.encoded, score, trial.resource))
        self._finished.append((trial, score))
        if not self._queue and not self._outstanding:
            self._rung += 1
            if self._rung >= len(self._bracket):
                self._bracket_index += 1
                self._rung = 0
            self._start_rung()


def _seed(seed: int, tid: int) -> int:
    return derive_seed(seed, "bohb", tid)
