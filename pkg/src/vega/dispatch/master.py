"""The master loop and the worker pools it drives.

The master owns the search algorithm, the :class:`TaskQueue` and the worker
slots.  Pools only move messages: the master calls ``send`` to hand out a
task and ``poll`` to collect events, which are tuples

* ``("result", worker_id, TrialResult)``
* ``("heartbeat", worker_id)``
* ``("exit", worker_id)``  (the worker is gone for good)

Three pools are provided.  :class:`InlinePool` evaluates synchronously and
is the deterministic reference.  :class:`ThreadPool` runs simulated workers
on threads and can kill them on demand.  :class:`SubprocessPool` runs
``python -m vega.dispatch.worker`` children over the NDJSON protocol.
"""

from __future__ import annotations

import json
import logging
import queue as _queue
import subprocess
import sys
import threading
import time
from typing import Any, Callable, Mapping, Protocol

from ..search.trial import Trial, TrialResult
from . import protocol
from .evaluators import evaluate
from .queue import DispatchError, TaskQueue, WorkerSlot

__all__ = ["Master", "InlinePool", "ThreadPool", "SubprocessPool", "make_pool"]

log = logging.getLogger(__name__)


class SearchDriver(Protocol):
    def ask(self) -> Trial | None: ...

    def tell(self, trial: Trial, result: TrialResult) -> Any: ...


def _desc(trial: Trial) -> Any:
    desc = trial.model_desc
    return desc.to_dict() if hasattr(desc, "to_dict") else desc


class InlinePool:
    """Evaluates each task inside ``send``; single-threaded and fully deterministic."""

    heartbeats = False

    def __init__(self, evaluator, workers: int = 1):
        self.evaluator = evaluator
        self.slots = [WorkerSlot(f"w{i}") for i in range(workers)]
        self._events: list = []

    def start(self) -> None:
        pass

    def send(self, worker_id: str, trial: Trial, attempt: int, seed: int) -> None:
        result = evaluate(self.evaluator, trial.sample, trial.resource, seed, trial_id=trial.trial_id,
                          attempt=attempt, model_desc=_desc(trial))
        self._events.append(("result", worker_id, result))

    def poll(self, timeout: float) -> list:
        events, self._events = self._events, []
        return events

    def close(self) -> None:
        pass


class ThreadPool:
    """Simulated workers on threads.

    ``fail_after`` maps a worker id to a task count: that worker dies silently
    when it receives that many tasks (the task in hand is lost and heartbeats
    stop), which is how fault injection is done.  :meth:`kill` does the same
    immediately.
    """

    heartbeats = True

    def __init__(self, evaluator, workers: int = 4, *, heartbeat_interval: float = 5.0,
                 fail_after: Mapping[str, int] | None = None):
        self.evaluator = evaluator
        self.slots = [WorkerSlot(f"w{i}") for i in range(workers)]
        self.heartbeat_interval = heartbeat_interval
        self.fail_after = dict(fail_after or {})
        self.outbox: _queue.Queue = _queue.Queue()
        self._inbox = {s.worker_id: _queue.Queue() for s in self.slots}
        self._killed = {s.worker_id: threading.Event() for s in self.slots}
        self._threads: list[threading.Thread] = []

    def start(self) -> None:
        for wid in self._inbox:
            for target in (self._work, self._beat):
                t = threading.Thread(target=target, args=(wid,), daemon=True, name=f"{wid}-{target.__name__}")
                t.start()
                self._threads.append(t)

    def kill(self, worker_id: str) -> None:
        self._killed[worker_id].set()

    def _beat(self, wid: str) -> None:
        killed = self._killed[wid]
        self.outbox.put(("heartbeat", wid))
        while not killed.wait(self.heartbeat_interval):
            self.outbox.put(("heartbeat", wid))

    def _work(self, wid: str) -> None:
        inbox, killed = self._inbox[wid], self._killed[wid]
        received = 0
        while not killed.is_set():
            try:
                item = inbox.get(timeout=0.05)
            except _queue.Empty:
                continue
            if item is None:
                return
            received += 1
            if self.fail_after.get(wid) == received:
                killed.set()
                return
            trial, attempt, seed = item
            result = evaluate(self.evaluator, trial.sample, trial.resource, seed, trial_id=trial.trial_id,
                              attempt=attempt, model_desc=_desc(trial))
            if killed.is_set():
                return
            self.outbox.put(("result", wid, result))

    def send(self, worker_id: str, trial: Trial, attempt: int, seed: int) -> None:
        self._inbox[worker_id].put((trial, attempt, seed))

    def poll(self, timeout: float) -> list:
        events = []
        try:
            events.append(self.outbox.get(timeout=timeout))
            while True:
                events.append(self.outbox.get_nowait())
        except _queue.Empty:
            pass
        return events

    def close(self) -> None:
        for wid, inbox in self._inbox.items():
            inbox.put(None)
            self._killed[wid].set()
        for t in self._threads:
            t.join(timeout=1.0)


class SubprocessPool:
    """Child processes speaking NDJSON on stdin/stdout, one reader thread each."""

    heartbeats = True

    def __init__(self, evaluator_config: Mapping[str, Any], workers: int = 2, *,
                 heartbeat_interval: float = 5.0, command: list[str] | None = None):
        self.evaluator_config = dict(evaluator_config)
        self.slots = [WorkerSlot(f"w{i}") for i in range(workers)]
        self.heartbeat_interval = heartbeat_interval
        self.command = command
        self.outbox: _queue.Queue = _queue.Queue()
        self._procs: dict[str, subprocess.Popen] = {}

    def _argv(self, wid: str) -> list[str]:
        if self.command is not None:
            return list(self.command)
        return [sys.executable, "-m", "vega.dispatch.worker", "--evaluator", json.dumps(self.evaluator_config),
                "--worker-id", wid, "--heartbeat", str(self.heartbeat_interval)]

    def start(self) -> None:
        for slot in self.slots:
            proc = subprocess.Popen(self._argv(slot.worker_id), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                    text=True, encoding="utf-8", bufsize=1)
            self._procs[slot.worker_id] = proc
            threading.Thread(target=self._read, args=(slot.worker_id, proc), daemon=True).start()

    def _read(self, wid: str, proc: subprocess.Popen) -> None:
        for line in proc.stdout:
            try:
                msg = protocol.decode(line)
            except protocol.ProtocolError as exc:
                log.warning("worker %s: %s", wid, exc)
                continue
            if msg["type"] == "result":
                self.outbox.put(("result", wid, protocol.result_from_message(msg)))
            elif msg["type"] == "heartbeat":
                self.outbox.put(("heartbeat", wid))
        self.outbox.put(("exit", wid))

    def kill(self, worker_id: str) -> None:
        self._procs[worker_id].kill()

    def send(self, worker_id: str, trial: Trial, attempt: int, seed: int) -> None:
        msg = protocol.task_message(trial.trial_id, attempt, trial.sample.to_json(), _desc(trial),
                                    trial.resource, seed)
        try:
            self._procs[worker_id].stdin.write(protocol.encode(msg))
            self._procs[worker_id].stdin.flush()
        except (BrokenPipeError, OSError, ValueError):
            self.outbox.put(("exit", worker_id))

    poll = ThreadPool.poll

    def close(self) -> None:
        for proc in self._procs.values():
            try:
                proc.stdin.write(protocol.encode(protocol.shutdown_message()))
                proc.stdin.close()
            except (BrokenPipeError, OSError, ValueError):
                pass
        for proc in self._procs.values():
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()


def make_pool(kind: str, evaluator, evaluator_config: Mapping[str, Any] | None = None, *, workers: int = 1,
              heartbeat_interval: float = 5.0):
    if kind == "inline":
        return InlinePool(evaluator, workers)
    if kind == "thread":
        return ThreadPool(evaluator, workers, heartbeat_interval=heartbeat_interval)
    if kind == "subprocess":
        return SubprocessPool(evaluator_config or {}, workers, heartbeat_interval=heartbeat_interval)
    raise ValueError(f"unknown worker pool {kind!r}")


class Master:
    """Ask the search for trials, dispatch them, feed results back exactly once.

    The run stops when the search has nothing more to offer (or the budget
    is spent) and every submitted trial is done.  ``max_trials`` caps the
    number of submitted trials, ``max_resource`` the summed resource of
    submitted trials.
    """

    def __init__(
        self,
        search: SearchDriver,
        pool,
        *,
        seed: int = 0,
        timeout: float = 600.0,
        max_retries: int = 2,
        heartbeat_interval: float = 5.0,
        max_trials: int | None = None,
        max_resource: float | None = None,
        poll_interval: float = 0.02,
        on_result: Callable[[Trial, TrialResult], None] | None = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.search = search
        self.pool = pool
        self.seed = seed
        self.queue = TaskQueue(timeout=timeout, max_retries=max_retries)
        self.worker_timeout = max(3 * heartbeat_interval, timeout) if pool.heartbeats else None
        self.max_trials = max_trials
        self.max_resource = max_resource
        self.poll_interval = poll_interval
        self.on_result = on_result
        self.clock = clock
        self.history: list[tuple[Trial, TrialResult]] = []
        self._delivered: set[int] = set()
        self._submitted = 0
        self._resource = 0.0

    @property
    def slots(self) -> list[WorkerSlot]:
        return self.pool.slots

    def _budget_left(self) -> bool:
        if self.max_trials is not None and self._submitted >= self.max_trials:
            return False
        return self.max_resource is None or self._resource < self.max_resource

    def _fill(self) -> bool:
        """Top up the pending queue; returns True once the search will offer nothing more."""
        idle = sum(s.idle for s in self.slots)
        while self._budget_left() and (len(self.queue.pending) < idle or self.queue.idle):
            trial = self.search.ask()
            if trial is None:
                return True
            self.queue.submit(trial)
            self._submitted += 1
            self._resource += trial.resource
        return not self._budget_left()

    def _deliver(self, result: TrialResult) -> None:
        if result.trial_id in self._delivered:
            raise DispatchError(f"trial {result.trial_id} delivered twice")
        self._delivered.add(result.trial_id)
        trial = self.queue.trials[result.trial_id]
        self.search.tell(trial, result)
        self.history.append((trial, result))
        if self.on_result is not None:
            self.on_result(trial, result)

    def _handle(self, event: tuple) -> None:
        kind, wid = event[0], event[1]
        slot = next((s for s in self.slots if s.worker_id == wid), None)
        if slot is None:
            return
        if kind == "exit":
            if slot.alive:
                log.warning("worker %s exited", wid)
                slot.kill()
            return
        if slot.alive:
            slot.last_heartbeat = self.clock()
        if kind == "result":
            delivered = self.queue.complete(event[2], self.slots)
            if delivered is not None:
                self._deliver(delivered)

    def run(self) -> list[tuple[Trial, TrialResult]]:
        self.pool.start()
        start = self.clock()
        for slot in self.slots:
            slot.last_heartbeat = start
        try:
            while True:
                exhausted = self._fill()
                for wid, trial, attempt in self.queue.assign(self.slots, self.clock()):
                    self.pool.send(wid, trial, attempt, self.seed)
                if exhausted and self.queue.idle:
                    break
                if not any(s.alive for s in self.slots):
                    raise DispatchError("all workers are dead with trials outstanding")
                for event in self.pool.poll(self.poll_interval):
                    self._handle(event)
                for result in self.queue.reap_timeouts(self.slots, self.clock(), self.worker_timeout):
                    self._deliver(result)
        finally:
            self.pool.close()
        return self.history
