"""Pipeline configuration: loading, defaults, validation.

A configuration has a ``general`` block, an ordered ``pipeline`` list of
step names and one block per step, found either at top level under the
step's name or inside a ``steps`` mapping.  Loading fills in every default
explicitly so the snapshot written next to the results says exactly what
ran.
"""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .. import _yaml
from ..netdesc import count_dnet_blocks
from ..space import SearchSpace, SpaceError, space_from_dict

__all__ = [
    "ConfigError",
    "StepConfig",
    "PipelineConfig",
    "load_pipeline",
    "parse_pipeline",
    "SEARCH_STEP",
    "TRAIN_STEP",
    "ALGORITHMS",
]

SEARCH_STEP, TRAIN_STEP = "SearchPipeStep", "FullyTrainPipeStep"
STEP_ALIASES = {
    "SearchPipeStep": SEARCH_STEP,
    "NasPipeStep": SEARCH_STEP,
    "HpoPipeStep": SEARCH_STEP,
    "FullyTrainPipeStep": TRAIN_STEP,
    "TrainPipeStep": TRAIN_STEP,
}
ALGORITHMS = {
    "RandomSearch": "RandomSearch",
    "Random": "RandomSearch",
    "random": "RandomSearch",
    "AshaHpo": "AshaHpo",
    "ASHA": "AshaHpo",
    "asha": "AshaHpo",
    "BohbHpo": "BohbHpo",
    "BOHB": "BohbHpo",
    "bohb": "BohbHpo",
    "EvolutionSearch": "EvolutionSearch",
    "EA": "EvolutionSearch",
    "ea": "EvolutionSearch",
}
# Primary metric and its orientation for each analytic function.
ANALYTIC_PRIMARY = {
    "sphere": ("loss", "min"),
    "branin": ("loss", "min"),
    "quadratic": ("score", "max"),
    "lr_peak": ("accuracy", "max"),
    "dnet": ("accuracy", "max"),
}
DNET_SPACE = "DnetSearchSpace"
GENERAL_DEFAULTS = {
    "worker": {
        "devices_per_job": 1,
        "workers": 1,
        "pool": "inline",
        "timeout": 600.0,
        "max_retries": 2,
        "heartbeat_interval": 5.0,
    },
    "output_dir": "vega_output",
    "seed": 0,
}


class ConfigError(ValueError):
    def __init__(self, message: str, step: str | None = None):
        super().__init__(f"step {step!r}: {message}" if step else message)
        self.step = step


def _merge(defaults: Mapping, given: Mapping | None) -> dict:
    out = copy.deepcopy(dict(defaults))
    for k, v in (given or {}).items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class StepConfig:
    name: str
    type: str
    block: dict
    space: SearchSpace | None = None

    @property
    def algorithm(self) -> dict:
        return self.block.get("search_algorithm", {})

    @property
    def evaluator(self) -> dict:
        return self.block["evaluator"]

    @property
    def epochs(self) -> int:
        return int(self.block["trainer"]["epochs"])

    @property
    def objectives(self) -> list[dict]:
        return list(self.block["objectives"])


@dataclass
class PipelineConfig:
    general: dict
    pipeline: list[str]
    steps: dict[str, StepConfig] = field(default_factory=dict)
    source: str | None = None

    @property
    def output_dir(self) -> Path:
        return Path(self.general["output_dir"])

    @property
    def seed(self) -> int:
        return int(self.general["seed"])

    def to_dict(self) -> dict:
        doc = {"general": copy.deepcopy(self.general), "pipeline": list(self.pipeline)}
        for name in self.pipeline:
            doc[name] = copy.deepcopy(self.steps[name].block)
        return doc

    def dumps(self) -> str:
        return _yaml.dump(self.to_dict())


# --------------------------------------------------------------------------
# per-step defaults


def _objectives(block: dict, evaluator: dict, step: str) -> list[dict]:
    algo = block.get("search_algorithm") or {}
    raw = block.get("objectives", algo.get("objectives"))
    if raw is None:
        raw = algo.get("objective", block.get("objective"))
    if raw is None:
        function = evaluator.get("function")
        metric, mode = ANALYTIC_PRIMARY.get(function, ("score", "max")) if evaluator["kind"] == "analytic" \
            else ("score", "max")
        raw = {"metric": metric, "mode": mode}
    if isinstance(raw, (str, Mapping)):
        raw = [raw]
    out = []
    for item in raw:
        if isinstance(item, str):
            item = {"metric": item}
        mode = str(item.get("mode", "max")).lower()
        if mode not in ("max", "min"):
            raise ConfigError(f"objective mode must be max or min, got {mode!r}", step)
        out.append({"metric": str(item["metric"]), "mode": mode})
    return out


def _evaluator_block(block: dict, step: str) -> dict:
    ev = dict(block.get("evaluator") or {"kind": "analytic", "function": "sphere"})
    kind = str(ev.pop("kind", ev.pop("type", "analytic"))).lower()
    if kind not in ("analytic", "tabular", "subprocess"):
        raise ConfigError(f"unknown evaluator kind {kind!r}", step)
    if kind == "analytic":
        ev.setdefault("function", "sphere")
        ev.setdefault("noise", 0.0)
        ev.setdefault("time_per_resource", 1.0)
    return {"kind": kind, **ev}


def _algorithm_block(block: dict, epochs: int, step: str) -> dict:
    algo = dict(block.get("search_algorithm") or {"type": "RandomSearch"})
    name = algo.get("type", "RandomSearch")
    if name not in ALGORITHMS:
        raise ConfigError(f"unknown search algorithm {name!r}; known: {sorted(set(ALGORITHMS.values()))}", step)
    algo["type"] = ALGORITHMS[name]
    algo.pop("objective", None)
    algo.pop("objectives", None)
    algo.setdefault("max_trials", 64)
    algo.setdefault("max_resource", None)
    if algo["max_trials"] is not None and int(algo["max_trials"]) < 1:
        raise ConfigError("max_trials must be >= 1", step)
    if algo["max_resource"] is not None and float(algo["max_resource"]) <= 0:
        raise ConfigError("max_resource must be > 0", step)
    kind = algo["type"]
    if kind == "RandomSearch":
        algo.setdefault("num_samples", None)
    elif kind == "AshaHpo":
        eta = int(algo.setdefault("eta", 3))
        r0 = int(algo.setdefault("r0", 1))
        if eta < 2 or r0 < 1:
            raise ConfigError("ASHA needs eta >= 2 and r0 >= 1", step)
        algo.setdefault("max_rungs", 1 + int(math.floor(math.log(max(epochs, r0) / r0, eta) + 1e-9)))
        algo.setdefault("num_samples", None)
    elif kind == "BohbHpo":
        algo.setdefault("eta", 3)
        algo.setdefault("r_min", 1)
        algo.setdefault("r_max", epochs)
        for k, v in (("gamma", 0.15), ("n_candidates", 24), ("min_bandwidth", 1e-3), ("bandwidth_factor", 1.0),
                     ("prior_weight", 1.0)):
            algo.setdefault(k, v)
    elif kind == "EvolutionSearch":
        for k, v in (("population", 8), ("mutation_rate", 0.2), ("sigma", 0.1), ("crossover", False),
                     ("num_samples", None)):
            algo.setdefault(k, v)
    return algo


def _space_block(block: dict, step: str) -> tuple[dict, SearchSpace]:
    raw = dict(block.get("search_space") or {"type": "SearchSpace"})
    if raw.get("type") == DNET_SPACE:
        raw.setdefault("key", "network.block")
        raw.setdefault("vocab", 7)
        raw.setdefault("ratios", 5)
        raw.setdefault("max_stem", 3)
        if count_dnet_blocks(int(raw["vocab"]), int(raw["ratios"]), int(raw["max_stem"])) < 1:
            raise ConfigError("DNet search space is empty", step)
        return raw, None
    raw.setdefault("type", "SearchSpace")
    try:
        space = space_from_dict(raw)
    except SpaceError as exc:
        raise ConfigError(f"search space: {exc}", step) from exc
    return raw, space


def _model_block(block: dict, pipeline: list[str], step_name: str, step_type: str) -> dict:
    model = dict(block.get("model") or {})
    if step_type == TRAIN_STEP:
        if "model_desc" in model and isinstance(model["model_desc"], Mapping):
            model.setdefault("source", "inline")
        elif "model_desc_file" in model:
            model.setdefault("source", "file")
        else:
            model.setdefault("source", "previous")
        if model["source"] == "previous":
            idx = pipeline.index(step_name)
            if idx == 0 and "step" not in model:
                raise ConfigError("model source 'previous' but this is the first step", step_name)
            model.setdefault("step", pipeline[idx - 1] if idx > 0 else None)
    return model


def _step(name: str, block: Any, pipeline: list[str]) -> StepConfig:
    if not isinstance(block, Mapping):
        raise ConfigError("step block must be a mapping", name)
    block = copy.deepcopy(dict(block))
    pipe_step = block.get("pipe_step") or {}
    raw_type = pipe_step.get("type") if isinstance(pipe_step, Mapping) else pipe_step
    if raw_type not in STEP_ALIASES:
        raise ConfigError(f"unknown step type {raw_type!r}", name)
    step_type = STEP_ALIASES[raw_type]
    block["pipe_step"] = {**(pipe_step if isinstance(pipe_step, Mapping) else {}), "type": step_type}
    trainer = dict(block.get("trainer") or {})
    trainer.setdefault("type", "Trainer")
    trainer.setdefault("epochs", 1)
    if int(trainer["epochs"]) < 1:
        raise ConfigError("trainer.epochs must be >= 1", name)
    block["trainer"] = trainer
    block["evaluator"] = _evaluator_block(block, name)
    space = None
    if step_type == SEARCH_STEP:
        block["search_algorithm"] = _algorithm_block(block, int(trainer["epochs"]), name)
        block["search_space"], space = _space_block(block, name)
    block["objectives"] = _objectives(block, block["evaluator"], name)
    if step_type == SEARCH_STEP and block["search_algorithm"]["type"] != "EvolutionSearch" \
            and len(block["objectives"]) != 1:
        raise ConfigError("only EvolutionSearch handles more than one objective", name)
    block["model"] = _model_block(block, pipeline, name, step_type)
    block.setdefault("num_best", 1)
    return StepConfig(name, step_type, block, space)


def _check_references(cfg: PipelineConfig) -> None:
    for i, name in enumerate(cfg.pipeline):
        step = cfg.steps[name]
        if step.type != TRAIN_STEP or step.block["model"]["source"] != "previous":
            continue
        src = step.block["model"]["step"]
        if src not in cfg.pipeline[:i]:
            raise ConfigError(f"model source step {src!r} does not run before this step", name)
        producer = cfg.steps[src]
        if producer.type != SEARCH_STEP or not _emits_models(producer):
            raise ConfigError(f"step {src!r} emits no model descriptions", name)


def _emits_models(step: StepConfig) -> bool:
    return step.block["search_space"].get("type") == DNET_SPACE or isinstance(
        step.block["model"].get("model_desc"), Mapping) or "model_desc_file" in step.block["model"]


def parse_pipeline(doc: Mapping[str, Any], source: str | None = None) -> PipelineConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("configuration must be a mapping")
    pipeline = doc.get("pipeline")
    if pipeline is None:
        raise ConfigError("missing 'pipeline' list")
    if isinstance(pipeline, str):
        pipeline = [pipeline]
    if not isinstance(pipeline, list):
        raise ConfigError("'pipeline' must be a list of step names")
    if not pipeline:
        raise ConfigError("empty pipeline")
    pipeline = [str(p) for p in pipeline]
    if len(set(pipeline)) != len(pipeline):
        raise ConfigError("step names in 'pipeline' must be unique")
    general = _merge(GENERAL_DEFAULTS, doc.get("general"))
    general["worker"].setdefault("capacity", general["worker"]["devices_per_job"])
    if os.environ.get("VEGA_OUTPUT_DIR"):
        general["output_dir"] = os.environ["VEGA_OUTPUT_DIR"]
    blocks = doc.get("steps") or {}
    cfg = PipelineConfig(general, pipeline, source=source)
    for name in pipeline:
        block = blocks.get(name, doc.get(name))
        if block is None:
            raise ConfigError(f"no configuration block for step {name!r}")
        cfg.steps[name] = _step(name, block, pipeline)
    _check_references(cfg)
    return cfg


def load_pipeline(path: str | Path) -> PipelineConfig:
    """Read, default and validate a pipeline configuration file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = _yaml.load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ConfigError(f"{path}: syntax error{where}: {getattr(exc, 'problem', exc)}") from exc
    return parse_pipeline(doc, str(path))
