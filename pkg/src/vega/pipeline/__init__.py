"""Pipelines of search and fully-train steps read from YAML."""

from .config import ALGORITHMS, ConfigError, PipelineConfig, StepConfig, load_pipeline, parse_pipeline
from .report import build_report, render_table, write_report
from .run import PipelineError, run_pipeline
from .steps import StepError, StepOutput, file_sha256, run_step, step_space

__all__ = [
    "ALGORITHMS",
    "ConfigError",
    "PipelineConfig",
    "PipelineError",
    "StepConfig",
    "StepError",
    "StepOutput",
    "build_report",
    "file_sha256",
    "load_pipeline",
    "parse_pipeline",
    "render_table",
    "run_pipeline",
    "run_step",
    "step_space",
    "write_report",
]
