"""Pipe steps: search and fully-train.

Every step writes into ``<output_dir>/<step_name>/``:

``history.jsonl``
    One record per delivered trial result, in delivery order.
``model_desc_<i>.json``
    Emitted model descriptions (search steps whose samples define models).
``output.json``
    The step's summary: best samples or Pareto archive, emitted
    descriptions with their SHA-256, and for a fully-train step the
    descriptions it consumed.

Paths recorded inside these files are relative to ``output_dir``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from ..dispatch import Master, make_evaluator, make_pool
from ..netdesc import DnetBlockSpec, ModelNode, apply_sample, dnet_network, enumerate_dnet_blocks, resnet_description
from ..sampler import ConfigSample, EncodedSample, derive_seed
from ..search import (
    AshaSearch,
    BohbConfig,
    BohbSearch,
    EvolutionSearch,
    Objective,
    ParetoArchive,
    RandomSearch,
    Trial,
    TrialResult,
    history_record,
)
from ..space import ParamSpec, ParamType, SearchSpace
from .config import DNET_SPACE, SEARCH_STEP, PipelineConfig, StepConfig

__all__ = ["StepOutput", "StepError", "run_step", "step_space", "file_sha256"]


class StepError(RuntimeError):
    def __init__(self, step: str, message: str):
        super().__init__(f"step {step!r}: {message}")
        self.step = step


@dataclass
class StepOutput:
    step_name: str
    best_samples: list[ConfigSample] = field(default_factory=list)
    model_descs: list[ModelNode] = field(default_factory=list)
    pareto: ParetoArchive | None = None
    history_path: Path | None = None
    output_path: Path | None = None
    summary: dict = field(default_factory=dict)


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dump(path: Path, doc: Any) -> None:
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def step_space(step: StepConfig) -> SearchSpace:
    """The step's search space; a DNet space becomes one STRING param over all block codes."""
    raw = step.block["search_space"]
    if raw.get("type") != DNET_SPACE:
        return step.space
    codes = tuple(s.code for s in enumerate_dnet_blocks(int(raw["vocab"]), int(raw["ratios"]), int(raw["max_stem"])))
    return SearchSpace((ParamSpec(str(raw["key"]), ParamType.STRING, codes),), (), DNET_SPACE)


def _model_builder(step: StepConfig) -> Callable[[ConfigSample], dict] | None:
    raw_space = step.block["search_space"]
    model = step.block["model"]
    if raw_space.get("type") == DNET_SPACE:
        key = str(raw_space["key"])
        options = {k: int(model[k]) for k in ("channels", "resolution", "repeats", "num_classes", "in_channels")
                   if k in model}

        def build_dnet(sample: ConfigSample) -> dict:
            return dnet_network(DnetBlockSpec.from_code(sample[key]), **options).to_dict()

        return build_dnet
    base = _base_description(model)
    if base is None:
        return None

    def build(sample: ConfigSample) -> dict:
        own = {k: v for k, v in sample.values.items() if k.split(".", 1)[0] == base.name}
        return apply_sample(base, own).to_dict()

    return build


def _base_description(model: dict) -> ModelNode | None:
    desc = model.get("model_desc")
    if "model_desc_file" in model:
        desc = json.loads(Path(model["model_desc_file"]).read_text(encoding="utf-8"))
    if not isinstance(desc, dict):
        return None
    if desc.get("type") == "resnet":
        return resnet_description(**{k: v for k, v in desc.items() if k != "type"})
    if desc.get("type") == "dnet":
        spec = DnetBlockSpec.from_code(desc["code"])
        return dnet_network(spec, **{k: v for k, v in desc.items() if k not in ("type", "code")})
    return ModelNode.from_dict(desc)


class _StepSearch:
    """Wraps a search driver: attaches model descriptions and objective vectors."""

    def __init__(self, inner, objectives: list[Objective], build: Callable | None):
        self.inner = inner
        self.objectives = objectives
        self.build = build

    def ask(self) -> Trial | None:
        trial = self.inner.ask()
        if trial is not None and self.build is not None and trial.model_desc is None:
            trial.model_desc = self.build(trial.sample)
        return trial

    def tell(self, trial: Trial, result: TrialResult) -> Any:
        if result.ok and all(o.metric in result.metrics for o in self.objectives):
            result.objectives = tuple(float(result.metrics[o.metric]) for o in self.objectives)
        return self.inner.tell(trial, result)


class _FixedTrials:
    def __init__(self, trials: list[Trial]):
        self.trials = list(trials)

    def ask(self) -> Trial | None:
        return self.trials.pop(0) if self.trials else None

    def tell(self, trial: Trial, result: TrialResult) -> None:
        pass


def _make_search(step: StepConfig, space: SearchSpace, seed: int, objectives: list[Objective]):
    algo = step.algorithm
    kind = algo["type"]
    epochs = step.epochs
    if kind == "RandomSearch":
        return RandomSearch(space, seed=seed, resource=epochs, num_samples=algo["num_samples"])
    if kind == "AshaHpo":
        return AshaSearch(space, seed=seed, eta=int(algo["eta"]), r0=int(algo["r0"]),
                          max_rungs=int(algo["max_rungs"]), num_samples=algo["num_samples"],
                          objective=objectives[0])
    if kind == "BohbHpo":
        config = BohbConfig(float(algo["gamma"]), int(algo["n_candidates"]), float(algo["min_bandwidth"]),
                            float(algo["bandwidth_factor"]), float(algo["prior_weight"]))
        return BohbSearch(space, seed=seed, eta=int(algo["eta"]), r_min=int(algo["r_min"]),
                          r_max=int(algo["r_max"]), objective=objectives[0], config=config)
    return EvolutionSearch(space, objectives, seed=seed, population=int(algo["population"]),
                           mutation_rate=float(algo["mutation_rate"]), sigma=float(algo["sigma"]),
                           crossover=bool(algo["crossover"]), resource=epochs, num_samples=algo["num_samples"])


def _run_master(config: PipelineConfig, step: StepConfig, search, seed: int, history_path: Path,
                max_trials: int | None, max_resource: float | None) -> list[tuple[Trial, TrialResult]]:
    worker = config.general["worker"]
    evaluator = make_evaluator(step.evaluator)
    pool = make_pool(str(worker["pool"]), evaluator, step.evaluator, workers=int(worker["workers"]),
                     heartbeat_interval=float(worker["heartbeat_interval"]))
    with history_path.open("w", encoding="utf-8", newline="\n") as fh:
        def write(trial: Trial, result: TrialResult) -> None:
            fh.write(json.dumps(history_record(trial, result), ensure_ascii=False) + "\n")

        master = Master(search, pool, seed=seed, timeout=float(worker["timeout"]),
                        max_retries=int(worker["max_retries"]),
                        heartbeat_interval=float(worker["heartbeat_interval"]), max_trials=max_trials,
                        max_resource=max_resource, on_result=write)
        return master.run()


def _ranked(history: list[tuple[Trial, TrialResult]], objective: Objective) -> list[tuple[Trial, TrialResult]]:
    scored = [(objective.score(r), i, t, r) for i, (t, r) in enumerate(history)]
    scored = [s for s in scored if math.isfinite(s[0])]
    scored.sort(key=lambda s: (-s[0], s[1]))
    return [(t, r) for _, _, t, r in scored]


def _best_entries(history, objective: Objective, n: int) -> list[tuple[Trial, TrialResult]]:
    out, seen = [], set()
    for t, r in _ranked(history, objective):
        key = t.sample.dumps()
        if key in seen:
            continue
        seen.add(key)
        out.append((t, r))
        if len(out) == n:
            break
    return out


def _emit_models(out_dir: Path, root: Path, entries: list[tuple[Trial, dict]]) -> list[dict]:
    emitted = []
    for i, (trial, desc) in enumerate(entries):
        path = out_dir / f"model_desc_{i}.json"
        path.write_text(ModelNode.from_dict(desc).to_json() + "\n", encoding="utf-8")
        emitted.append({"file": path.relative_to(root).as_posix(), "sha256": file_sha256(path),
                        "trial_id": trial.trial_id, "sample": trial.sample.to_json()})
    return emitted


def _summary(step: StepConfig, history, objectives: list[Objective]) -> dict:
    ok = [r for _, r in history if r.ok]
    return {
        "step": step.name,
        "type": step.type,
        "status": "ok",
        "history": f"{step.name}/history.jsonl",
        "trials": len(history),
        "ok_trials": len(ok),
        "objectives": [{"metric": o.metric, "mode": o.mode} for o in objectives],
    }


def _entry_json(trial: Trial, result: TrialResult) -> dict:
    return {"trial_id": trial.trial_id, "rung": trial.rung, "resource": trial.resource,
            "sample": trial.sample.to_json(), "metrics": dict(result.metrics)}


def _run_search(config: PipelineConfig, step: StepConfig, out_dir: Path) -> StepOutput:
    seed = derive_seed(config.seed, step.name)
    objectives = [Objective(o["metric"], o["mode"]) for o in step.objectives]
    space = step_space(step)
    build = _model_builder(step)
    inner = _make_search(step, space, seed, objectives)
    search = _StepSearch(inner, objectives, build)
    history_path = out_dir / "history.jsonl"
    algo = step.algorithm
    history = _run_master(config, step, search, seed, history_path, algo["max_trials"], algo["max_resource"])
    if not any(r.ok for _, r in history):
        raise StepError(step.name, f"no successful trials out of {len(history)}")

    summary = _summary(step, history, objectives)
    pareto = None
    if len(objectives) > 1:
        pareto = inner.archive if isinstance(inner, EvolutionSearch) else None
        if pareto is None:
            pareto = ParetoArchive(tuple(o.mode for o in objectives))
            for t, r in history:
                if r.ok:
                    pareto.insert(t.sample, r.objectives, encoded=t.encoded, trial_id=t.trial_id)
        by_id = {t.trial_id: (t, r) for t, r in history}
        chosen = [by_id[e.trial_id] for e in sorted(pareto.entries, key=lambda e: e.trial_id)]
        summary["pareto"] = [
            {**_entry_json(t, r), "objectives": list(r.objectives)} for t, r in chosen
        ]
    else:
        chosen = _best_entries(history, objectives[0], int(step.block["num_best"]))
    summary["best"] = [_entry_json(t, r) for t, r in chosen]
    models = [(t, t.model_desc) for t, _ in chosen if t.model_desc is not None]
    summary["model_descs"] = _emit_models(out_dir, config.output_dir, models)
    return StepOutput(step.name, [t.sample for t, _ in chosen], [ModelNode.from_dict(d) for _, d in models],
                      pareto, history_path, summary=summary)


def _consumed_descs(config: PipelineConfig, step: StepConfig) -> list[dict]:
    model = step.block["model"]
    source = model["source"]
    if source == "inline":
        return [{"file": None, "sha256": None, "sample": {}, "desc": dict(model["model_desc"])}]
    if source == "file":
        path = Path(model["model_desc_file"])
        return [{"file": str(path), "sha256": file_sha256(path), "sample": {},
                 "desc": json.loads(path.read_text(encoding="utf-8"))}]
    producer = config.output_dir / model["step"] / "output.json"
    if not producer.exists():
        raise StepError(step.name, f"no output from step {model['step']!r} at {producer}")
    emitted = json.loads(producer.read_text(encoding="utf-8")).get("model_descs", [])
    if not emitted:
        raise StepError(step.name, f"step {model['step']!r} emitted no model descriptions")
    out = []
    for item in emitted:
        path = config.output_dir / item["file"]
        digest = file_sha256(path)
        if digest != item["sha256"]:
            raise StepError(step.name, f"{item['file']} changed since it was emitted (sha256 mismatch)")
        out.append({"file": item["file"], "sha256": digest, "sample": item.get("sample", {}),
                    "desc": json.loads(path.read_text(encoding="utf-8"))})
    return out


def _run_train(config: PipelineConfig, step: StepConfig, out_dir: Path) -> StepOutput:
    seed = derive_seed(config.seed, step.name)
    objectives = [Objective(o["metric"], o["mode"]) for o in step.objectives]
    consumed = _consumed_descs(config, step)
    trials = [
        Trial(i, ConfigSample(dict(item["sample"])), EncodedSample({}), step.epochs, model_desc=item["desc"])
        for i, item in enumerate(consumed)
    ]
    search = _StepSearch(_FixedTrials(trials), objectives, None)
    history_path = out_dir / "history.jsonl"
    history = _run_master(config, step, search, seed, history_path, None, None)
    if not any(r.ok for _, r in history):
        raise StepError(step.name, "every model failed to evaluate")
    summary = _summary(step, history, objectives)
    summary["consumed"] = [{"file": c["file"], "sha256": c["sha256"]} for c in consumed]
    summary["results"] = [_entry_json(t, r) for t, r in sorted(history, key=lambda e: e[0].trial_id)]
    chosen = _best_entries(history, objectives[0], int(step.block["num_best"]))
    summary["best"] = [_entry_json(t, r) for t, r in chosen]
    summary["model_descs"] = []
    return StepOutput(step.name, [t.sample for t, _ in chosen], [ModelNode.from_dict(c["desc"]) for c in consumed],
                      None, history_path, summary=summary)


def run_step(config: PipelineConfig, step_name: str, inputs: StepOutput | None = None) -> StepOutput:
    """Run one step and persist its files under ``output_dir/step_name``.

    ``inputs`` is accepted for symmetry with in-memory callers; the hand-off
    between steps always goes through the files the producer wrote.
    """
    step = config.steps[step_name]
    out_dir = config.output_dir / step_name
    out_dir.mkdir(parents=True, exist_ok=True)
    for stale in out_dir.glob("model_desc_*.json"):
        stale.unlink()
    output = (_run_search if step.type == SEARCH_STEP else _run_train)(config, step, out_dir)
    output.output_path = out_dir / "output.json"
    _dump(output.output_path, output.summary)
    return output
