"""Experiment driver: training, the active loop, reports and the CLI."""

from .config import ExperimentConfig, load_config, parse_config
from .loop import ExperimentResult, RoundReport, evaluate, run_active_loop
from .report import emit_report, render_from_csv
from .training import SGD, train_rounds

__all__ = [
    "SGD",
    "ExperimentConfig",
    "ExperimentResult",
    "RoundReport",
    "emit_report",
    "evaluate",
    "load_config",
    "parse_config",
    "render_from_csv",
    "run_active_loop",
    "train_rounds",
]
