"""Asynchronous successive halving (ASHA).

Rung ``r`` evaluates at resource ``r0 * eta**r``.  When a trial completes at
rung ``r`` it is promoted if it sits in the top ``floor(n / eta)`` of the
``n`` results that rung has collected so far; the scheduler never waits for a
rung to fill.  Older trials that become promotable later are picked up by
:func:`next_promotion`, which the driver consults before sampling anything
new.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

from ..sampler import derive_seed, sample
from ..space import SearchSpace
from .trial import Objective, Trial, TrialResult

__all__ = [
    "AshaState",
    "Promote",
    "SampleNew",
    "Finalize",
    "asha_on_result",
    "next_promotion",
    "top_k",
    "AshaSearch",
]


@dataclass(frozen=True)
class Promote:
    trial_id: int
    rung: int
    resource: int


@dataclass(frozen=True)
class SampleNew:
    pass


@dataclass(frozen=True)
class Finalize:
    trial_id: int


@dataclass
class AshaState:
    eta: int = 3
    r0: int = 1
    max_rungs: int = 4
    objective: Objective = field(default_factory=Objective)
    rungs: list[list[tuple[int, float]]] = field(default_factory=list)
    promoted: list[set[int]] = field(default_factory=list)
    trial_rung: dict[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.eta < 2:
            raise ValueError("eta must be >= 2")
        if self.r0 < 1 or self.max_rungs < 1:
            raise ValueError("r0 and max_rungs must be >= 1")
        while len(self.rungs) < self.max_rungs:
            self.rungs.append([])
            self.promoted.append(set())

    def resource(self, rung: int) -> int:
        return self.r0 * self.eta**rung

    def register(self, trial_id: int, rung: int = 0) -> None:
        if trial_id in self.trial_rung:
            raise ValueError(f"trial {trial_id} already registered")
        if not 0 <= rung < self.max_rungs:
            raise ValueError(f"rung {rung} outside 0..{self.max_rungs - 1}")
        self.trial_rung[trial_id] = rung


def top_k(entries: list[tuple[int, float]], k: int) -> list[int]:
    """Ids of the ``k`` best (higher score first, earlier id on ties)."""
    ranked = sorted(entries, key=lambda e: (-e[1], e[0]))
    return [tid for tid, _ in ranked[:k]]


def _promotable(state: AshaState, rung: int, trial_id: int) -> bool:
    entries = state.rungs[rung]
    score = dict(entries)[trial_id]
    if not math.isfinite(score) or trial_id in state.promoted[rung]:
        return False
    return trial_id in top_k(entries, len(entries) // state.eta)


def asha_on_result(state: AshaState, result: TrialResult):
    """Record ``result`` and decide what the freed worker should do next."""
    if result.trial_id not in state.trial_rung:
        raise KeyError(f"unknown trial {result.trial_id}")
    rung = state.trial_rung[result.trial_id]
    if any(tid == result.trial_id for tid, _ in state.rungs[rung]):
        raise ValueError(f"trial {result.trial_id} already reported at rung {rung}")
    state.rungs[rung].append((result.trial_id, state.objective.score(result)))
    if rung >= state.max_rungs - 1:
        return Finalize(result.trial_id)
    if _promotable(state, rung, result.trial_id):
        state.promoted[rung].add(result.trial_id)
        return Promote(result.trial_id, rung + 1, state.resource(rung + 1))
    return SampleNew()


def next_promotion(state: AshaState) -> Promote | None:
    """Promote the best pending candidate, scanning from the highest rung down."""
    for rung in range(state.max_rungs - 2, -1, -1):
        entries = state.rungs[rung]
        for tid in top_k(entries, len(entries) // state.eta):
            if _promotable(state, rung, tid):
                state.promoted[rung].add(tid)
                return Promote(tid, rung + 1, state.resource(rung + 1))
    return None


class AshaSearch:
    """Ask/tell driver around :class:`AshaState`.

    ``num_samples`` bounds how many fresh configurations enter rung 0;
    ``None`` keeps sampling until the caller stops asking.
    """

    def __init__(
        self,
        space: SearchSpace,
        *,
        seed: int = 0,
        eta: int = 3,
        r0: int = 1,
        max_rungs: int = 4,
        num_samples: int | None = None,
        objective: Objective | None = None,
        samples: list | None = None,
    ):
        self.space = space
        self.seed = seed
        self.state = AshaState(eta, r0, max_rungs, objective or Objective())
        self.num_samples = num_samples if samples is None else len(samples)
        self._fixed = samples
        self._sampled = 0
        self._next_id = 0
        self._trials: dict[int, Trial] = {}
        self._queued: deque[Promote] = deque()

    def _new_id(self) -> int:
        tid = self._next_id
        self._next_id += 1
        return tid

    def _promotion_trial(self, p: Promote) -> Trial:
        src = self._trials[p.trial_id]
        trial = Trial(self._new_id(), src.sample, src.encoded, p.resource, p.rung, parent_trial=p.trial_id,
                      model_desc=src.model_desc)
        self.state.register(trial.trial_id, p.rung)
        self._trials[trial.trial_id] = trial
        return trial

    def ask(self) -> Trial | None:
        if self._queued:
            return self._promotion_trial(self._queued.popleft())
        p = next_promotion(self.state)
        if p is not None:
            return self._promotion_trial(p)
        if self.num_samples is not None and self._sampled >= self.num_samples:
            return None
        if self._fixed is not None:
            encoded, config = self._fixed[self._sampled]
        else:
            encoded, config = sample(self.space, derive_seed(self.seed, "asha", self._sampled))
        self._sampled += 1
        trial = Trial(self._new_id(), config, encoded, self.state.resource(0), 0)
        self.state.register(trial.trial_id, 0)
        self._trials[trial.trial_id] = trial
        return trial

    def tell(self, trial: Trial, result: TrialResult):
        decision = asha_on_result(self.state, result)
        if isinstance(decision, Promote):
            self._queued.append(decision)
        return decision

    def trials(self) -> Iterator[Trial]:
        return iter(self._trials.values())

    def best(self) -> Trial | None:
        """Best trial at the highest rung that has any result."""
        for rung in range(self.state.max_rungs - 1, -1, -1):
            entries = [e for e in self.state.rungs[rung] if math.isfinite(e[1])]
            if entries:
                return self._trials[top_k(entries, 1)[0]]
        return None
