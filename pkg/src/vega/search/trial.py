"""Trials, results, and how a result turns into a comparable score."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from ..sampler import ConfigSample, EncodedSample

__all__ = ["Trial", "TrialResult", "Objective", "history_record"]

STATUSES = ("ok", "failed", "timeout")


@dataclass
class Trial:
    trial_id: int
    sample: ConfigSample
    encoded: EncodedSample
    resource: int = 1
    rung: int = 0
    bracket: int = 0
    parent_trial: int | None = None
    model_desc: dict | None = None


@dataclass
class TrialResult:
    trial_id: int
    metrics: Mapping[str, float] = field(default_factory=dict)
    objectives: tuple[float, ...] = ()
    status: str = "ok"
    wall_time: float = 0.0
    attempt: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class Objective:
    """A metric name plus its orientation; scores are always higher-is-better."""

    metric: str = "score"
    mode: str = "max"

    def __post_init__(self) -> None:
        if self.mode not in ("max", "min"):
            raise ValueError(f"mode must be 'max' or 'min', got {self.mode!r}")

    def score(self, result: TrialResult) -> float:
        if not result.ok or self.metric not in result.metrics:
            return -math.inf
        value = float(result.metrics[self.metric])
        if math.isnan(value):
            return -math.inf
        return value if self.mode == "max" else -value

    def better(self, a: float, b: float) -> bool:
        return a > b if self.mode == "max" else a < b


def objective_vector(result: TrialResult, objectives: Sequence[Objective]) -> tuple[float, ...]:
    return tuple(float(result.metrics[o.metric]) for o in objectives)


def history_record(trial: Trial, result: TrialResult) -> dict[str, Any]:
    """One JSON-lines record of the run history."""
    return {
        "trial_id": trial.trial_id,
        "sample": trial.sample.to_json(),
        "rung": trial.rung,
        "bracket": trial.bracket,
        "resource": trial.resource,
        "parent_trial": trial.parent_trial,
        "attempt": result.attempt,
        "status": result.status,
        "metrics": dict(result.metrics),
        "objectives": list(result.objectives),
        "wall_time": result.wall_time,
    }
