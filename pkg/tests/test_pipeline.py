import json
import math
import subprocess
import sys
from importlib.resources import files
from pathlib import Path

import pytest
import yaml

from oracles import nondominated_filter
from vega.cli import main as cli_main
from vega.netdesc import DnetBlockSpec, ModelNode
from vega.pipeline import (
    ConfigError,
    PipelineError,
    build_report,
    file_sha256,
    load_pipeline,
    parse_pipeline,
    run_pipeline,
    run_step,
)

BUNDLED = Path(str(files("vega") / "data"))

MINIMAL_NAS = """
general:
    worker:
        devices_per_job: 1
pipeline: [hpo]
hpo:
    pipe_step:
        type: NasPipeStep
    dataset:
        type: Cifar10
    search_algorithm:
        type: AshaHpo
    search_space:
        type: SearchSpace
    trainer:
        type: Trainer
        epochs: 10
    model:
        model_desc:
            ...
"""


@pytest.fixture(autouse=True)
def _no_env_override(monkeypatch):
    monkeypatch.delenv("VEGA_OUTPUT_DIR", raising=False)


def bundled(name, out_dir, **algo):
    doc = yaml.safe_load((BUNDLED / f"{name}.yml").read_text())
    doc["general"]["output_dir"] = str(out_dir)
    first = doc["pipeline"][0]
    doc[first]["search_algorithm"].update(algo)
    return parse_pipeline(doc)


def read_history(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()]


# ---- loading


def test_minimal_listing_loads():
    cfg = parse_pipeline(yaml.safe_load(MINIMAL_NAS))
    step = cfg.steps["hpo"]
    assert cfg.pipeline == ["hpo"] and step.type == "SearchPipeStep"
    assert step.block["dataset"] == {"type": "Cifar10"}
    assert step.epochs == 10 and step.algorithm["type"] == "AshaHpo"
    assert step.algorithm["max_rungs"] == 3 and step.algorithm["max_trials"] == 64
    assert len(step.space) == 0
    assert step.block["model"]["model_desc"] == "..."
    assert cfg.general["worker"]["capacity"] == 1


def test_defaults_are_materialized_in_snapshot():
    cfg = parse_pipeline(yaml.safe_load(MINIMAL_NAS))
    snap = yaml.safe_load(cfg.dumps())
    assert snap["general"]["seed"] == 0 and snap["general"]["worker"]["pool"] == "inline"
    assert snap["hpo"]["search_algorithm"]["eta"] == 3
    assert snap["hpo"]["objectives"] == [{"metric": "loss", "mode": "min"}]
    assert parse_pipeline(snap).to_dict() == cfg.to_dict()


def test_steps_mapping_layout():
    doc = {"pipeline": ["a"], "steps": {"a": {"pipe_step": {"type": "SearchPipeStep"}}}}
    assert parse_pipeline(doc).steps["a"].algorithm["type"] == "RandomSearch"


@pytest.mark.parametrize("doc, fragment", [
    ({"pipeline": []}, "empty pipeline"),
    ({}, "missing 'pipeline'"),
    ({"pipeline": ["a"]}, "no configuration block"),
    ({"pipeline": ["a"], "a": {"pipe_step": {"type": "TuneStep"}}}, "unknown step type"),
    ({"pipeline": ["a"], "a": {"pipe_step": {"type": "HpoPipeStep"}, "search_algorithm": {"type": "GridSearch"}}},
     "unknown search algorithm"),
    ({"pipeline": ["a"], "a": {"pipe_step": {"type": "HpoPipeStep"}, "search_algorithm": {"max_trials": 0}}},
     "max_trials"),
    ({"pipeline": ["a"], "a": {"pipe_step": {"type": "HpoPipeStep"},
                               "objectives": [{"metric": "x"}, {"metric": "y"}]}}, "more than one objective"),
    ({"pipeline": ["a"], "a": {"pipe_step": {"type": "HpoPipeStep"},
                               "search_space": {"hyperparameters": [{"key": "k", "type": "INT", "range": [3, 1]}]}}},
     "malformed range"),
    ({"pipeline": ["t"], "t": {"pipe_step": {"type": "FullyTrainPipeStep"}}}, "first step"),
])
def test_config_errors(doc, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_pipeline(doc)


def test_nas_to_fullytrain_references_check():
    cfg = load_pipeline(BUNDLED / "nas_dnet.yml")
    assert cfg.pipeline == ["nas", "fullytrain"]
    assert cfg.steps["fullytrain"].block["model"] == {"source": "previous", "step": "nas"}
    doc = yaml.safe_load((BUNDLED / "nas_dnet.yml").read_text())
    doc["nas"]["search_space"] = {"type": "SearchSpace"}
    with pytest.raises(ConfigError, match="emits no model descriptions"):
        parse_pipeline(doc)
    doc = yaml.safe_load((BUNDLED / "nas_dnet.yml").read_text())
    doc["pipeline"] = ["fullytrain", "nas"]
    with pytest.raises(ConfigError, match="does not run before"):
        parse_pipeline(doc)


def test_syntax_error_is_located(tmp_path):
    path = tmp_path / "bad.yml"
    path.write_text("pipeline: [a\n")
    with pytest.raises(ConfigError, match="line"):
        load_pipeline(path)


def test_env_overrides_output_dir(monkeypatch, tmp_path):
    monkeypatch.setenv("VEGA_OUTPUT_DIR", str(tmp_path / "env"))
    assert load_pipeline(BUNDLED / "hpo_asha.yml").output_dir == tmp_path / "env"


# ---- running


@pytest.fixture(scope="module")
def hpo_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("hpo")
    cfg = bundled("hpo_asha", out, max_trials=50)
    outputs, report = run_pipeline(cfg)
    return cfg, outputs, report


def test_asha_finds_learning_rate_peak(hpo_run):
    cfg, outputs, report = hpo_run
    (best,) = outputs[0].best_samples
    assert 3e-3 <= best["trainer.optim.params.lr"] <= 3e-2
    assert report["steps"][0]["best"]["sample"]["trainer.optim.params.lr"] == best["trainer.optim.params.lr"]
    assert len(read_history(outputs[0].history_path)) == 50


def test_run_leaves_expected_files(hpo_run):
    cfg, _, _ = hpo_run
    root = cfg.output_dir
    for rel in ("config.yml", "report.json", "report.txt", "hpo/history.jsonl", "hpo/output.json"):
        assert (root / rel).is_file(), rel
    assert load_pipeline(root / "config.yml").to_dict() == cfg.to_dict()


def test_report_best_matches_history_scan(hpo_run):
    cfg, outputs, report = hpo_run
    records = [r for r in read_history(outputs[0].history_path) if r["status"] == "ok"]
    top = max(r["metrics"]["accuracy"] for r in records)
    assert report["steps"][0]["best"]["value"] == top
    assert build_report(cfg.output_dir) == report
    assert "accuracy (max)" in (cfg.output_dir / "report.txt").read_text()


def test_history_records_asha_rungs(hpo_run):
    _, outputs, _ = hpo_run
    records = read_history(outputs[0].history_path)
    assert {"trial_id", "sample", "rung", "metrics", "status", "wall_time"} <= set(records[0])
    assert {r["resource"] for r in records} <= {1, 3, 9}
    assert any(r["rung"] > 0 for r in records)
    for r in records:
        assert ("trainer.optim.params.momentum" in r["sample"]) == (r["sample"]["trainer.optim.type"] == "SGD")


def test_single_trial_budget(tmp_path):
    cfg = bundled("hpo_asha", tmp_path, max_trials=1)
    outputs, _ = run_pipeline(cfg)
    assert len(read_history(outputs[0].history_path)) == 1


def test_runs_are_deterministic(tmp_path):
    reports = []
    for name in ("a", "b"):
        cfg = bundled("hpo_asha", tmp_path / name, max_trials=20)
        run_pipeline(cfg)
        reports.append(((tmp_path / name / "hpo/history.jsonl").read_bytes(),
                        (tmp_path / name / "report.json").read_bytes()))
    assert reports[0] == reports[1]


def test_later_steps_do_not_affect_earlier_ones(tmp_path):
    full = bundled("nas_dnet", tmp_path / "full", max_trials=40)
    run_pipeline(full)
    doc = yaml.safe_load((BUNDLED / "nas_dnet.yml").read_text())
    doc["general"]["output_dir"] = str(tmp_path / "alone")
    doc["nas"]["search_algorithm"]["max_trials"] = 40
    doc["pipeline"] = ["nas"]
    del doc["fullytrain"]
    run_pipeline(parse_pipeline(doc))
    for rel in ("nas/history.jsonl", "nas/output.json"):
        assert (tmp_path / "full" / rel).read_bytes() == (tmp_path / "alone" / rel).read_bytes()


@pytest.fixture(scope="module")
def nas_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("nas")
    cfg = bundled("nas_dnet", out, max_trials=120)
    outputs, report = run_pipeline(cfg)
    return cfg, outputs, report


def test_nas_pareto_is_nondominated(nas_run):
    cfg, (nas, _), report = nas_run
    points = [tuple(e.objectives) for e in nas.pareto]
    history = [r for r in read_history(nas.history_path) if r["status"] == "ok"]
    every = [(r["metrics"]["accuracy"], r["metrics"]["flops"]) for r in history]
    assert set(points) == nondominated_filter(every, ("max", "min"))
    assert len(report["steps"][0]["pareto"]) == len(points)


def test_nas_emits_one_description_per_front_member(nas_run):
    cfg, (nas, _), _ = nas_run
    out = json.loads((cfg.output_dir / "nas/output.json").read_text())
    assert len(out["model_descs"]) == len(out["pareto"]) == len(nas.model_descs)
    for item, entry in zip(out["model_descs"], out["pareto"]):
        desc = ModelNode.from_json((cfg.output_dir / item["file"]).read_text())
        assert desc.attrs["blocks"] == [entry["sample"]["network.block"]]
        DnetBlockSpec.from_code(entry["sample"]["network.block"])


def test_fullytrain_consumes_exactly_the_emitted_files(nas_run):
    cfg, (nas, train), _ = nas_run
    emitted = json.loads((cfg.output_dir / "nas/output.json").read_text())["model_descs"]
    consumed = json.loads((cfg.output_dir / "fullytrain/output.json").read_text())["consumed"]
    assert [(c["file"], c["sha256"]) for c in consumed] == [(e["file"], e["sha256"]) for e in emitted]
    assert all(file_sha256(cfg.output_dir / c["file"]) == c["sha256"] for c in consumed)
    results = read_history(train.history_path)
    assert len(results) == len(emitted) and {r["resource"] for r in results} == {10}


def test_tampered_handoff_is_rejected(nas_run, tmp_path):
    cfg, _, _ = nas_run
    path = cfg.output_dir / "nas/model_desc_0.json"
    original = path.read_bytes()
    try:
        path.write_bytes(original.replace(b'"network"', b'"network" ', 1))
        with pytest.raises(Exception, match="sha256 mismatch"):
            run_step(cfg, "fullytrain")
    finally:
        path.write_bytes(original)


def test_failed_step_is_reported(tmp_path):
    doc = {"general": {"output_dir": str(tmp_path)}, "pipeline": ["a"],
           "a": {"pipe_step": {"type": "HpoPipeStep"}, "evaluator": {"kind": "tabular", "records": []},
                 "search_space": {"hyperparameters": [{"key": "x", "type": "FLOAT", "range": [0, 1]}]},
                 "search_algorithm": {"max_trials": 3}}}
    with pytest.raises(PipelineError) as info:
        run_pipeline(parse_pipeline(doc))
    assert info.value.step == "a" and info.value.report["steps"][0]["status"] == "failed"
    assert json.loads((tmp_path / "report.json").read_text())["steps"][0]["status"] == "failed"


def test_inline_model_for_fullytrain(tmp_path):
    doc = {"general": {"output_dir": str(tmp_path)}, "pipeline": ["t"],
           "t": {"pipe_step": {"type": "FullyTrainPipeStep"}, "evaluator": {"kind": "analytic", "function": "dnet"},
                 "model": {"model_desc": {"name": "dnet", "kind": "network",
                                          "attrs": {"blocks": ["S1:0_R:0"]}, "children": []}}}}
    outputs, report = run_pipeline(parse_pipeline(doc))
    assert report["steps"][0]["status"] == "ok" and report["steps"][0]["best"]["metric"] == "accuracy"


# ---- CLI


def test_cli_validate(capsys):
    assert cli_main(["validate", "hpo_asha"]) == 0
    out = capsys.readouterr().out
    assert "hpo: SearchPipeStep, AshaHpo, 5 param(s), 1 condition(s)" in out and out.strip().endswith("ok")


def test_cli_validate_failure(tmp_path, capsys):
    bad = tmp_path / "bad.yml"
    bad.write_text("pipeline: []\n")
    assert cli_main(["validate", str(bad)]) == 1
    assert "empty pipeline" in capsys.readouterr().err


def test_cli_sample(capsys):
    assert cli_main(["sample", "hpo_asha", "--step", "hpo", "-n", "3", "--seed", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and all("trainer.optim.params.lr" in json.loads(line) for line in lines)
    assert cli_main(["sample", "hpo_asha", "--step", "nope"]) == 1


def test_cli_enumerate(capsys):
    assert cli_main(["enumerate-dnet", "--vocab", "2", "--ratios", "1", "--max-stem", "2", "--list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("26 valid blocks") and len(out) == 27 and out[1] == "S1:0_R:0"


def test_cli_run_and_report(tmp_path, capsys):
    out_dir = tmp_path / "run"
    assert cli_main(["run", "hpo_asha", "--output-dir", str(out_dir)]) == 0
    first = capsys.readouterr().out
    assert "hpo" in first and (out_dir / "report.json").exists()
    assert cli_main(["report", str(out_dir)]) == 0
    assert capsys.readouterr().out.splitlines()[:3] == first.splitlines()[:3]
    assert cli_main(["report", str(tmp_path / "missing")]) == 1


def test_cli_as_module(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vega.cli", "enumerate-dnet"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("145565 valid blocks")


def test_cli_run_honours_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("VEGA_OUTPUT_DIR", str(tmp_path / "envrun"))
    cfg = yaml.safe_load((BUNDLED / "hpo_asha.yml").read_text())
    cfg["hpo"]["search_algorithm"]["max_trials"] = 4
    path = tmp_path / "small.yml"
    path.write_text(yaml.safe_dump(cfg))
    assert cli_main(["run", str(path)]) == 0
    assert len(read_history(tmp_path / "envrun/hpo/history.jsonl")) == 4
    assert math.isfinite(json.loads((tmp_path / "envrun/report.json").read_text())["steps"][0]["best"]["value"])
