"""Run report, rebuilt from the files a run leaves behind.

``report.json`` lists, per step, its status, trial counts and the best value
of the primary metric; the value is recomputed by scanning the step's
history file, so the report and the history can never disagree.
``report.txt`` is the same content as a fixed-width table.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .. import _yaml

__all__ = ["build_report", "render_table", "write_report"]


def _scan_best(history: Path, metric: str, mode: str) -> dict | None:
    best = None
    with history.open(encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            value = rec.get("metrics", {}).get(metric)
            if rec.get("status") != "ok" or value is None or not math.isfinite(value):
                continue
            better = best is None or (value > best["value"] if mode == "max" else value < best["value"])
            if better:
                best = {"metric": metric, "mode": mode, "value": value, "trial_id": rec["trial_id"],
                        "sample": rec["sample"]}
    return best


def build_report(output_dir: str | Path) -> dict:
    root = Path(output_dir)
    snapshot = _yaml.load((root / "config.yml").read_text(encoding="utf-8"))
    steps = []
    for name in snapshot["pipeline"]:
        out_path = root / name / "output.json"
        if not out_path.exists():
            steps.append({"step": name, "status": "not run"})
            continue
        out = json.loads(out_path.read_text(encoding="utf-8"))
        entry = {"step": name, "type": out.get("type"), "status": out.get("status", "ok")}
        if entry["status"] != "ok":
            entry["error"] = out.get("error")
            steps.append(entry)
            continue
        objective = out["objectives"][0]
        entry.update({
            "trials": out["trials"],
            "ok_trials": out["ok_trials"],
            "history": out["history"],
            "best": _scan_best(root / out["history"], objective["metric"], objective["mode"]),
            "best_samples": [b["sample"] for b in out.get("best", [])],
            "model_descs": [m["file"] for m in out.get("model_descs", [])],
        })
        if "pareto" in out:
            entry["pareto"] = [{"trial_id": p["trial_id"], "sample": p["sample"], "objectives": p["objectives"]}
                               for p in out["pareto"]]
        if "consumed" in out:
            entry["consumed"] = out["consumed"]
        steps.append(entry)
    return {"pipeline": list(snapshot["pipeline"]), "steps": steps}


def render_table(report: dict) -> str:
    header = ("step", "type", "status", "trials", "metric", "best", "trial", "pareto")
    rows = [header]
    for s in report["steps"]:
        best = s.get("best") or {}
        value = best.get("value")
        rows.append((
            s["step"],
            s.get("type") or "-",
            s["status"],
            str(s.get("trials", "-")),
            f"{best['metric']} ({best['mode']})" if best else "-",
            f"{value:.6g}" if value is not None else "-",
            str(best.get("trial_id", "-")),
            str(len(s["pareto"])) if "pareto" in s else "-",
        ))
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_report(output_dir: str | Path) -> dict:
    root = Path(output_dir)
    report = build_report(root)
    (root / "report.json").write_text(json.dumps(report, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    (root / "report.txt").write_text(render_table(report), encoding="utf-8")
    return report
