"""Experiment runner, persistence, plotting, and diagnostics."""

from .config import ExperimentConfig, load_config
from .diag import DiagReport, diag_report
from .experiment import evaluate_policy, run_experiment
from .plot import emit_plot
from .stats import area_under_curve, bootstrap_ci

__all__ = ["ExperimentConfig", "load_config", "DiagReport", "diag_report", "evaluate_policy",
           "run_experiment", "emit_plot", "area_under_curve", "bootstrap_ci"]
