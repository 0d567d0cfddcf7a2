"""``vega`` command line: run, validate, sample, enumerate-dnet, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib.resources import files
from pathlib import Path

from .netdesc import count_dnet_blocks, enumerate_dnet_blocks
from .pipeline import ConfigError, PipelineError, load_pipeline, render_table, run_pipeline, write_report
from .pipeline.config import SEARCH_STEP
from .pipeline.steps import step_space
from .sampler import derive_seed, sample


def _config_path(value: str) -> Path:
    """A file path, or the name of a bundled config such as ``hpo_asha``."""
    path = Path(value)
    if path.exists():
        return path
    bundled = files("vega") / "data" / (value if value.endswith(".yml") else value + ".yml")
    if bundled.is_file():
        return Path(str(bundled))
    return path


def _print_report(report: dict) -> None:
    sys.stdout.write(render_table(report))


def cmd_run(args) -> int:
    cfg = load_pipeline(_config_path(args.config))
    if args.output_dir:
        cfg.general["output_dir"] = args.output_dir
    try:
        _, report = run_pipeline(cfg)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _print_report(exc.report)
        return 1
    _print_report(report)
    print(f"outputs in {cfg.output_dir}")
    return 0


def cmd_validate(args) -> int:
    try:
        cfg = load_pipeline(_config_path(args.config))
    except (ConfigError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    for name in cfg.pipeline:
        step = cfg.steps[name]
        detail = ""
        if step.type == SEARCH_STEP:
            space = step_space(step)
            detail = f", {step.algorithm['type']}, {len(space.params)} param(s), {len(space.conditions)} condition(s)"
        print(f"{name}: {step.type}{detail}")
    if args.show:
        sys.stdout.write(cfg.dumps())
    print("ok")
    return 0


def cmd_sample(args) -> int:
    cfg = load_pipeline(_config_path(args.config))
    name = args.step or cfg.pipeline[0]
    if name not in cfg.steps or cfg.steps[name].type != SEARCH_STEP:
        print(f"error: {name!r} is not a search step of this pipeline", file=sys.stderr)
        return 1
    space = step_space(cfg.steps[name])
    for i in range(args.n):
        _, config = sample(space, derive_seed(args.seed, name, i))
        print(json.dumps(config.to_json(), ensure_ascii=False))
    return 0


def cmd_enumerate(args) -> int:
    total = count_dnet_blocks(args.vocab, args.ratios, args.max_stem)
    print(f"{total} valid blocks (vocab={args.vocab}, ratios={args.ratios}, max_stem={args.max_stem})")
    if args.list:
        for i, spec in enumerate(enumerate_dnet_blocks(args.vocab, args.ratios, args.max_stem)):
            if args.limit is not None and i >= args.limit:
                break
            print(spec.code)
    return 0


def cmd_report(args) -> int:
    root = Path(args.output_dir)
    if not (root / "config.yml").exists():
        print(f"error: {root} does not hold a pipeline run", file=sys.stderr)
        return 1
    report = write_report(root)
    _print_report(report)
    return 0 if all(s["status"] == "ok" for s in report["steps"]) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vega", description="Search pipelines driven by YAML configs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a pipeline")
    p.add_argument("config", help="config file or bundled config name (hpo_asha, nas_dnet)")
    p.add_argument("--output-dir", help="override general.output_dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="parse and check a config")
    p.add_argument("config")
    p.add_argument("--show", action="store_true", help="print the config with defaults filled in")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sample", help="print decoded samples from a step's search space")
    p.add_argument("config")
    p.add_argument("--step")
    p.add_argument("-n", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("enumerate-dnet", help="count (and list) valid DNet blocks")
    p.add_argument("--vocab", type=int, default=7)
    p.add_argument("--ratios", type=int, default=5)
    p.add_argument("--max-stem", type=int, default=3)
    p.add_argument("--list", action="store_true")
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("report", help="re-render the report of a finished run")
    p.add_argument("output_dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
