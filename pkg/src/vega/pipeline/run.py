"""Sequential pipeline driver."""

from __future__ import annotations

import json
import logging

from .config import PipelineConfig
from .report import write_report
from .steps import StepError, StepOutput, run_step

__all__ = ["PipelineError", "run_pipeline"]

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    def __init__(self, step: str, cause: BaseException, report: dict):
        super().__init__(f"step {step!r} failed: {cause}")
        self.step = step
        self.report = report


def run_pipeline(config: PipelineConfig) -> tuple[list[StepOutput], dict]:
    """Run every step in order; write the config snapshot, step files and report.

    A failing step stops the run: its ``output.json`` records the error, the
    report is still written, and :class:`PipelineError` is raised.
    """
    root = config.output_dir
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.yml").write_text(config.dumps(), encoding="utf-8")
    for name in config.pipeline:
        (root / name / "output.json").unlink(missing_ok=True)
    outputs: list[StepOutput] = []
    for name in config.pipeline:
        log.info("running step %s", name)
        try:
            outputs.append(run_step(config, name, outputs[-1] if outputs else None))
        except (StepError, ValueError, KeyError, RuntimeError, OSError) as exc:
            step_dir = root / name
            step_dir.mkdir(parents=True, exist_ok=True)
            failure = {"step": name, "type": config.steps[name].type, "status": "failed", "error": str(exc)}
            (step_dir / "output.json").write_text(json.dumps(failure, indent=2) + "\n", encoding="utf-8")
            raise PipelineError(name, exc, write_report(root)) from exc
    return outputs, write_report(root)
