"""Experiment orchestration: configs, runs, sweeps, evaluation, plots and the CLI."""

from ..seeding import seed_everything
from .config import RunConfig
from .plots import PlotInputError, emit_plots
from .runner import RunRecord, ensure_run, eval_policies, eval_run, load_record, run_single, sweep

__all__ = [
    "PlotInputError",
    "RunConfig",
    "RunRecord",
    "emit_plots",
    "ensure_run",
    "eval_policies",
    "eval_run",
    "load_record",
    "run_single",
    "seed_everything",
    "sweep",
]
