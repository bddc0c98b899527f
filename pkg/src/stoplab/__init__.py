"""Optimal stopping with an unknown location: Bellman thresholds, plug-in
policies and their regret for the exponential-decay family."""

from __future__ import annotations

from .bellman import (
    Discount,
    Threshold,
    ThresholdConvergenceError,
    asymptotic_threshold,
    critical_perturbation,
    critical_sample_size,
    solve_threshold,
    solve_thresholds,
    threshold_sensitivity,
    value_iteration,
    value_iteration_bounds,
)
from .dist import DistSpec, TailBracket
from .inference import SampleBatch, estimator_dispersion, mle_location
from .policy import (
    PolicySpec,
    RegretReport,
    expected_stop_time,
    oracle_value,
    perturbed_regret,
    plugin_regret,
    plugin_regret_quadrature,
    policy_value,
)
from .quadrature import QuadratureError
from .simlab import ExperimentGrid, PlugInRule, SimConfig, phase_report, run_episode, run_experiment

__version__ = "0.1.0"

__all__ = [
    "Discount",
    "DistSpec",
    "ExperimentGrid",
    "PlugInRule",
    "PolicySpec",
    "QuadratureError",
    "RegretReport",
    "SampleBatch",
    "SimConfig",
    "TailBracket",
    "Threshold",
    "ThresholdConvergenceError",
    "asymptotic_threshold",
    "critical_perturbation",
    "critical_sample_size",
    "estimator_dispersion",
    "expected_stop_time",
    "mle_location",
    "oracle_value",
    "perturbed_regret",
    "phase_report",
    "plugin_regret",
    "plugin_regret_quadrature",
    "policy_value",
    "run_episode",
    "run_experiment",
    "solve_threshold",
    "solve_thresholds",
    "threshold_sensitivity",
    "value_iteration",
    "value_iteration_bounds",
]
