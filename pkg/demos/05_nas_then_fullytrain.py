"""Two-step pipeline: multi-objective NAS over DNet blocks, then train every Pareto member.

Uses the bundled nas_dnet config, writes into a temporary directory and
prints the report table.  The same run from a shell:

    vega run nas_dnet --output-dir /tmp/nas_demo

Run:  python3 demos/05_nas_then_fullytrain.py
"""

import json
import tempfile
from importlib.resources import files
from pathlib import Path

from vega.pipeline import load_pipeline, render_table, run_pipeline


def main():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = load_pipeline(Path(str(files("vega") / "data" / "nas_dnet.yml")))
        cfg.general["output_dir"] = tmp
        (nas, train), report = run_pipeline(cfg)

        print(render_table(report))
        print()
        front = sorted(nas.pareto, key=lambda e: e.objectives[1])
        print(f"Pareto front ({len(front)} blocks), cheapest first:")
        for entry in front[:5]:
            acc, flops = entry.objectives
            print(f"  {entry.sample['network.block']:<28} accuracy {acc:.4f}  flops {flops:.4f}")
        print("  ...")

        handoff = json.loads((Path(tmp) / "fullytrain" / "output.json").read_text())["consumed"]
        print(f"fullytrain read {len(handoff)} description files, each checked against its sha256")


if __name__ == "__main__":
    main()
