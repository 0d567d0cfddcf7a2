"""Master-side bookkeeping: worker slots and the pending/in-flight/done queue.

Everything here is single-owner state.  Worker I/O happens elsewhere and
reaches these objects only through the master loop.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..search.trial import Trial, TrialResult

__all__ = ["WorkerSlot", "InFlight", "TaskQueue", "DispatchError"]

log = logging.getLogger(__name__)

IDLE, BUSY, DEAD = "idle", "busy", "dead"


class DispatchError(RuntimeError):
    pass


@dataclass
class WorkerSlot:
    worker_id: str
    capacity: int = 1
    state: str = IDLE
    trial_id: int | None = None
    last_heartbeat: float = 0.0

    @property
    def idle(self) -> bool:
        return self.state == IDLE

    @property
    def alive(self) -> bool:
        return self.state != DEAD

    def occupy(self, trial_id: int) -> None:
        self.state, self.trial_id = BUSY, trial_id

    def release(self) -> None:
        if self.state == BUSY:
            self.state, self.trial_id = IDLE, None

    def kill(self) -> None:
        self.state, self.trial_id = DEAD, None


@dataclass
class InFlight:
    trial: Trial
    worker_id: str
    deadline: float
    attempt: int


@dataclass
class TaskQueue:
    """``pending`` (FIFO of ``(trial, attempt)``), ``in_flight`` and ``done``.

    The three collections are kept pairwise disjoint on ``trial_id``.  A
    trial is tried at most ``max_retries + 1`` times before it is recorded as
    a timeout.
    """

    timeout: float = 60.0
    max_retries: int = 2
    pending: deque = field(default_factory=deque)
    in_flight: dict[int, InFlight] = field(default_factory=dict)
    done: dict[int, TrialResult] = field(default_factory=dict)
    trials: dict[int, Trial] = field(default_factory=dict)
    dropped: int = 0

    def submit(self, trial: Trial) -> "TaskQueue":
        if trial.trial_id in self.trials:
            raise DispatchError(f"duplicate trial_id {trial.trial_id}")
        self.trials[trial.trial_id] = trial
        self.pending.append((trial, 0))
        return self

    def pending_ids(self) -> list[int]:
        return [t.trial_id for t, _ in self.pending]

    def assign(self, slots: Sequence[WorkerSlot], now: float) -> list[tuple[str, Trial, int]]:
        """Pair pending trials with idle slots, both in order; returns ``(worker_id, trial, attempt)``."""
        out = []
        for slot in sorted((s for s in slots if s.idle), key=lambda s: s.worker_id):
            if not self.pending:
                break
            trial, attempt = self.pending.popleft()
            slot.occupy(trial.trial_id)
            self.in_flight[trial.trial_id] = InFlight(trial, slot.worker_id, now + self.timeout, attempt)
            out.append((slot.worker_id, trial, attempt))
        return out

    def complete(self, result: TrialResult, slots: Iterable[WorkerSlot] = ()) -> TrialResult | None:
        """Accept ``result`` and return it for delivery, or ``None`` if it must be dropped.

        The first result for a trial wins, whichever attempt produced it;
        anything arriving after that is logged and ignored.
        """
        tid = result.trial_id
        for slot in slots:
            if slot.trial_id == tid:
                slot.release()
        if tid in self.done:
            self.dropped += 1
            log.info("dropping duplicate result for trial %s (attempt %s)", tid, result.attempt)
            return None
        if tid not in self.trials:
            self.dropped += 1
            log.warning("dropping result for unknown trial %s", tid)
            return None
        if tid in self.in_flight:
            del self.in_flight[tid]
        else:
            # A late result from an earlier attempt while the retry still waits.
            self.pending = deque((t, a) for t, a in self.pending if t.trial_id != tid)
        self.done[tid] = result
        return result

    def reap_timeouts(self, slots: Sequence[WorkerSlot], now: float,
                      worker_timeout: float | None = None) -> list[TrialResult]:
        """Expire overdue trials; returns the timeout results that became final.

        A trial is overdue once its deadline passes or its worker is dead.
        Workers whose last heartbeat is older than ``worker_timeout`` are
        marked dead first.
        """
        by_id = {s.worker_id: s for s in slots}
        if worker_timeout is not None:
            for slot in slots:
                if slot.alive and now - slot.last_heartbeat > worker_timeout:
                    log.warning("worker %s missed heartbeats; marking dead", slot.worker_id)
                    slot.kill()
        finished = []
        for tid in sorted(self.in_flight):
            entry = self.in_flight[tid]
            owner = by_id.get(entry.worker_id)
            owner_dead = owner is not None and not owner.alive
            if now <= entry.deadline and not owner_dead:
                continue
            del self.in_flight[tid]
            if owner is not None and owner.trial_id == tid:
                owner.release()
            if entry.attempt < self.max_retries:
                self.pending.append((entry.trial, entry.attempt + 1))
            else:
                result = TrialResult(tid, {}, (), "timeout", self.timeout, entry.attempt)
                self.done[tid] = result
                finished.append(result)
        return finished

    def check_conservation(self) -> None:
        p, f, d = set(self.pending_ids()), set(self.in_flight), set(self.done)
        if len(p) != len(self.pending) or p & f or p & d or f & d or (p | f | d) != set(self.trials):
            raise AssertionError("pending, in_flight and done do not partition the submitted trials")

    @property
    def idle(self) -> bool:
        return not self.pending and not self.in_flight
