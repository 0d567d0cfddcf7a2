"""Newline-delimited JSON messages between master and workers.

master -> worker::

    {"type": "task", "trial_id": 3, "attempt": 0, "sample": {...},
     "model_desc": {...} | null, "resource": 9, "seed": 17}
    {"type": "shutdown"}

worker -> master::

    {"type": "result", "trial_id": 3, "attempt": 0, "status": "ok",
     "metrics": {...}, "wall_time": 9.0}
    {"type": "heartbeat", "worker_id": "w0"}
"""

from __future__ import annotations

import json
from typing import Any, Mapping

from ..search.trial import TrialResult

__all__ = [
    "ProtocolError",
    "encode",
    "decode",
    "task_message",
    "result_message",
    "heartbeat_message",
    "shutdown_message",
    "result_from_message",
]


class ProtocolError(ValueError):
    pass


_REQUIRED = {
    "task": {"trial_id": int, "attempt": int, "sample": dict, "resource": int, "seed": int},
    "result": {"trial_id": int, "attempt": int, "status": str, "metrics": dict, "wall_time": (int, float)},
    "heartbeat": {"worker_id": str},
    "shutdown": {},
}


def encode(msg: Mapping[str, Any]) -> str:
    return json.dumps(msg, separators=(",", ":"), ensure_ascii=False) + "\n"


def decode(line: str) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not JSON: {line[:80]!r}") from exc
    if not isinstance(msg, dict) or msg.get("type") not in _REQUIRED:
        raise ProtocolError(f"unknown message: {line[:80]!r}")
    for name, kind in _REQUIRED[msg["type"]].items():
        value = msg.get(name)
        if not isinstance(value, kind) or isinstance(value, bool):
            raise ProtocolError(f"{msg['type']} message: bad or missing {name!r}")
    if msg["type"] == "task" and not (msg.get("model_desc") is None or isinstance(msg["model_desc"], dict)):
        raise ProtocolError("task message: model_desc must be an object or null")
    if msg["type"] == "result" and msg["status"] not in ("ok", "failed"):
        raise ProtocolError(f"result message: bad status {msg['status']!r}")
    return msg


def task_message(trial_id: int, attempt: int, sample: Mapping, model_desc: Mapping | None,
                 resource: int, seed: int) -> dict:
    return {"type": "task", "trial_id": int(trial_id), "attempt": int(attempt), "sample": dict(sample),
            "model_desc": None if model_desc is None else dict(model_desc), "resource": int(resource),
            "seed": int(seed)}


def result_message(result: TrialResult) -> dict:
    status = "ok" if result.status == "ok" else "failed"
    return {"type": "result", "trial_id": result.trial_id, "attempt": result.attempt, "status": status,
            "metrics": dict(result.metrics), "wall_time": float(result.wall_time)}


def heartbeat_message(worker_id: str) -> dict:
    return {"type": "heartbeat", "worker_id": str(worker_id)}


def shutdown_message() -> dict:
    return {"type": "shutdown"}


def result_from_message(msg: Mapping[str, Any]) -> TrialResult:
    return TrialResult(msg["trial_id"], dict(msg["metrics"]), status=msg["status"],
                       wall_time=float(msg["wall_time"]), attempt=msg["attempt"])
