"""Master/worker trial dispatch with pluggable evaluators."""

from .evaluators import (
    ANALYTIC_FUNCTIONS,
    AnalyticEvaluator,
    EvaluationError,
    SubprocessEvaluator,
    TabularEvaluator,
    canonical_key,
    evaluate,
    make_evaluator,
)
from .master import InlinePool, Master, SubprocessPool, ThreadPool, make_pool
from .queue import DispatchError, InFlight, TaskQueue, WorkerSlot

__all__ = [
    "ANALYTIC_FUNCTIONS",
    "AnalyticEvaluator",
    "DispatchError",
    "EvaluationError",
    "InFlight",
    "InlinePool",
    "Master",
    "SubprocessEvaluator",
    "SubprocessPool",
    "TabularEvaluator",
    "TaskQueue",
    "ThreadPool",
    "WorkerSlot",
    "canonical_key",
    "evaluate",
    "make_evaluator",
    "make_pool",
]
