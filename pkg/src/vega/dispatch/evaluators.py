"""Evaluators: the stand-ins for training that turn ``(sample, resource)`` into metrics.

``analytic``
    A closed-form objective plus Gaussian noise whose scale shrinks as
    ``1 / resource``.  The noise stream is seeded by ``(seed, sample,
    resource)``, so identical pairs always evaluate identically.  Reported
    ``wall_time`` is simulated (``resource * time_per_resource``) which keeps
    history files reproducible.
``tabular``
    Lookup in a JSON-lines benchmark file keyed by :func:`canonical_key`.
``subprocess``
    One child process per evaluation, spoken to over the NDJSON protocol.
"""

from __future__ import annotations

import json
import logging
import math
import subprocess
import sys
import time
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ..netdesc import DnetBlockSpec, ModelNode, dnet_network, estimate_cost, validate_dnet_block
from ..sampler import derive_seed, make_rng
from ..search.trial import TrialResult
from . import protocol

__all__ = [
    "canonical_key",
    "AnalyticEvaluator",
    "TabularEvaluator",
    "SubprocessEvaluator",
    "EvaluationError",
    "ANALYTIC_FUNCTIONS",
    "make_evaluator",
    "evaluate",
]

log = logging.getLogger(__name__)


class EvaluationError(RuntimeError):
    pass


def _plain(sample: Any) -> dict:
    if hasattr(sample, "to_json"):
        return sample.to_json()
    return dict(sample)


def canonical_key(sample: Any, resource: int | None = None) -> str:
    """Sorted-key compact JSON; ``repr`` floats are already shortest round-trip."""
    doc = _plain(sample)
    if resource is not None:
        doc = {"resource": resource, "sample": doc}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# --------------------------------------------------------------------------
# closed-form objectives
#
# Each takes (values, params, model_desc) and returns a metric dict.  The
# first entry is the one noise is applied to.


def _numbers(values: Mapping[str, Any]) -> list[float]:
    out = []
    for v in values.values():
        if isinstance(v, bool):
            continue
        if isinstance(v, (int, float)):
            out.append(float(v))
        elif isinstance(v, (list, tuple)):
            out.extend(_numbers({str(i): x for i, x in enumerate(v)}))
    return out


def _pick(values: Mapping[str, Any], params: Mapping[str, Any], name: str, index: int) -> float:
    key = params.get(f"{name}_key")
    if key is not None:
        return float(values[key])
    if name in values:
        return float(values[name])
    return _numbers(values)[index]


def sphere(values, params, model_desc=None) -> dict:
    return {"loss": float(sum(x * x for x in _numbers(values)))}


def branin(values, params, model_desc=None) -> dict:
    x1, x2 = _pick(values, params, "x1", 0), _pick(values, params, "x2", 1)
    a, b, c = 1.0, 5.1 / (4 * math.pi**2), 5.0 / math.pi
    r, s, t = 6.0, 10.0, 1.0 / (8 * math.pi)
    return {"loss": a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1 - t) * math.cos(x1) + s}


def quadratic(values, params, model_desc=None) -> dict:
    """``score = -sum (x_k - target_k)**2`` over the keys in ``params['target']``."""
    target = params.get("target", {})
    if not isinstance(target, Mapping):
        target = {k: target for k in values if isinstance(values[k], (int, float))}
    return {"score": -float(sum((float(values[k]) - float(t)) ** 2 for k, t in target.items()))}


def lr_peak(values, params, model_desc=None) -> dict:
    """Accuracy-like score peaking at ``lr = peak`` on a log scale.

    Optional momentum and batch-size keys add small, bounded effects so a
    realistic HPO space has more than one thing to get right.
    """
    lr = float(values[params.get("lr_key", "trainer.optim.params.lr")])
    peak = float(params.get("peak", 1e-2))
    acc = 0.92 - 0.08 * math.log10(lr / peak) ** 2
    mom = values.get(params.get("momentum_key", "trainer.optim.params.momentum"))
    if isinstance(mom, (int, float)):
        acc += 0.02 * float(mom)
    batch = values.get(params.get("batch_key", "dataset.batch_size"))
    if isinstance(batch, (int, float)) and batch > 0:
        acc -= 0.005 * abs(math.log2(float(batch) / 64.0))
    return {"accuracy": acc}


def dnet_score(values, params, model_desc=None) -> dict:
    """Synthetic accuracy plus exact FLOPs/params for a DNet network.

    With a model description the first block code and the cost come from
    it; otherwise the code is ``values[params['code_key']]`` (default: the
    first string value) and the network is rendered here.  Accuracy grows
    with log-capacity and skips, so it trades off against FLOPs.
    """
    if model_desc is not None:
        net = model_desc if isinstance(model_desc, ModelNode) else ModelNode.from_dict(model_desc)
        code = net.attrs["blocks"][0]
        spec = DnetBlockSpec.from_code(code)
    else:
        key = params.get("code_key")
        code = values[key] if key else next(v for v in values.values() if isinstance(v, str))
        spec = DnetBlockSpec.from_code(code)
        net = dnet_network([spec], channels=int(params.get("channels", 64)),
                           resolution=int(params.get("resolution", 32)), repeats=int(params.get("repeats", 1)))
    errors = validate_dnet_block(spec)
    if errors:
        raise EvaluationError(f"invalid block {code}: {'; '.join(errors)}")
    cost = estimate_cost(net)
    mixing = {"A": 0.012, "C": 0.008}
    acc = (0.55 + 0.06 * math.log1p(100.0 * cost.params_millions)
           + sum(mixing[m] for _, _, m in spec.skips) - 0.01 * abs(spec.k - 2))
    return {"accuracy": acc, "flops": cost.flops_billions, "params": cost.params_millions}


ANALYTIC_FUNCTIONS: dict[str, Callable[..., dict]] = {
    "sphere": sphere,
    "branin": branin,
    "quadratic": quadratic,
    "lr_peak": lr_peak,
    "dnet": dnet_score,
}


class AnalyticEvaluator:
    kind = "analytic"

    def __init__(self, function: str = "sphere", *, noise: float = 0.0, time_per_resource: float = 1.0,
                 learning_curve: float = 0.0, delay: float = 0.0, **params: Any):
        if function not in ANALYTIC_FUNCTIONS:
            raise ValueError(f"unknown analytic function {function!r}; known: {sorted(ANALYTIC_FUNCTIONS)}")
        self.function = function
        self.noise = float(noise)
        self.time_per_resource = float(time_per_resource)
        # learning_curve > 0 scales the primary metric by 1 - exp(-resource / learning_curve).
        self.learning_curve = float(learning_curve)
        self.delay = float(delay)
        self.params = params

    def metrics(self, sample: Any, resource: int, seed: int, model_desc: Any = None) -> dict:
        values = _plain(sample)
        out = dict(ANALYTIC_FUNCTIONS[self.function](values, self.params, model_desc))
        primary = next(iter(out))
        value = out[primary]
        if self.learning_curve > 0:
            value *= 1.0 - math.exp(-resource / self.learning_curve)
        if self.noise > 0:
            rng = make_rng(derive_seed(seed, canonical_key(values, resource)))
            value += float(rng.normal()) * self.noise / max(resource, 1)
        out[primary] = value
        return out

    def evaluate(self, sample: Any, resource: int, seed: int, *, trial_id: int = 0, attempt: int = 0,
                 model_desc: Any = None) -> TrialResult:
        if self.delay:
            time.sleep(self.delay)
        metrics = self.metrics(sample, resource, seed, model_desc)
        return TrialResult(trial_id, metrics, status="ok", wall_time=resource * self.time_per_resource,
                           attempt=attempt)


class TabularEvaluator:
    """Metrics looked up from ``{"sample": ..., "metrics": ...}`` records.

    Records may carry a ``"resource"`` field; a lookup first tries the exact
    ``(sample, resource)`` key and then the resource-free one.
    """

    kind = "tabular"

    def __init__(self, path: str | Path | None = None, *, records: Sequence[Mapping] | None = None,
                 time_per_resource: float = 1.0):
        self.table: dict[str, dict] = {}
        self.time_per_resource = float(time_per_resource)
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                records = [json.loads(line) for line in fh if line.strip()]
        for rec in records or ():
            key = canonical_key(rec["sample"], rec.get("resource"))
            self.table[key] = dict(rec["metrics"])

    def metrics(self, sample: Any, resource: int, seed: int = 0, model_desc: Any = None) -> dict:
        for key in (canonical_key(sample, resource), canonical_key(sample)):
            if key in self.table:
                return dict(self.table[key])
        raise EvaluationError(f"no tabular entry for {canonical_key(sample)}")

    def evaluate(self, sample: Any, resource: int, seed: int, *, trial_id: int = 0, attempt: int = 0,
                 model_desc: Any = None) -> TrialResult:
        metrics = self.metrics(sample, resource)
        return TrialResult(trial_id, metrics, status="ok", wall_time=resource * self.time_per_resource,
                           attempt=attempt)


class SubprocessEvaluator:
    """Runs ``command`` once per evaluation: one task line in, one result line out."""

    kind = "subprocess"

    def __init__(self, command: Sequence[str] | None = None, *, evaluator: Mapping | None = None,
                 timeout: float = 60.0):
        if command is None:
            if evaluator is None:
                raise ValueError("subprocess evaluator needs a command or an inner evaluator config")
            command = [sys.executable, "-m", "vega.dispatch.worker", "--evaluator", json.dumps(dict(evaluator))]
        self.command = list(command)
        self.timeout = float(timeout)

    def evaluate(self, sample: Any, resource: int, seed: int, *, trial_id: int = 0, attempt: int = 0,
                 model_desc: Any = None) -> TrialResult:
        task = protocol.task_message(trial_id, attempt, _plain(sample), model_desc, resource, seed)
        stdin = protocol.encode(task) + protocol.encode(protocol.shutdown_message())
        try:
            proc = subprocess.run(self.command, input=stdin, capture_output=True, text=True,
                                  encoding="utf-8", timeout=self.timeout)
        except subprocess.TimeoutExpired:
            log.warning("subprocess evaluator timed out on trial %s", trial_id)
            return TrialResult(trial_id, status="failed", wall_time=self.timeout, attempt=attempt)
        for line in proc.stdout.splitlines():
            try:
                msg = protocol.decode(line)
            except protocol.ProtocolError:
                continue
            if msg["type"] == "result" and msg["trial_id"] == trial_id:
                return protocol.result_from_message(msg)
        log.warning("subprocess evaluator exited %s without a result: %s", proc.returncode, proc.stderr.strip())
        return TrialResult(trial_id, status="failed", attempt=attempt)


def make_evaluator(config: Mapping[str, Any] | None):
    """Build an evaluator from its config block (``kind`` or ``type`` selects it)."""
    config = dict(config or {})
    kind = str(config.pop("kind", config.pop("type", "analytic"))).lower()
    if kind == "analytic":
        return AnalyticEvaluator(**config)
    if kind == "tabular":
        return TabularEvaluator(**config)
    if kind == "subprocess":
        return SubprocessEvaluator(**config)
    raise ValueError(f"unknown evaluator kind {kind!r}")


def evaluate(evaluator, sample: Any, resource: int, seed: int, *, trial_id: int = 0, attempt: int = 0,
             model_desc: Any = None) -> TrialResult:
    """Evaluate and never raise: evaluator errors come back as ``status="failed"``."""
    try:
        result = evaluator.evaluate(sample, resource, seed, trial_id=trial_id, attempt=attempt,
                                    model_desc=model_desc)
    except Exception as exc:  # noqa: BLE001 - any evaluator fault is a failed trial
        log.warning("trial %s failed: %s", trial_id, exc)
        return TrialResult(trial_id, status="failed", attempt=attempt)
    if isinstance(result.metrics, Mapping) and any(
        isinstance(v, float) and not np.isfinite(v) for v in result.metrics.values()
    ):
        return TrialResult(trial_id, dict(result.metrics), status="failed", wall_time=result.wall_time,
                           attempt=attempt)
    return result
