"""Config parsing, experiment dispatch and reporting."""

from .config import RunConfig, build_config, load_config, parse_text
from .experiments import REGISTRY, run_experiment
from .report import ExperimentReport, Record, emit_report, parse_report

__all__ = [
    "REGISTRY", "ExperimentReport", "Record", "RunConfig", "build_config", "emit_report", "load_config",
    "parse_report", "parse_text", "run_experiment",
]
