"""Optimal and estimated discovery sets under domain shift."""

from .distributions import (
    FeatureDomain,
    GaussianMixture,
    JointDistribution,
    LabeledSample,
    TablePmf,
    UnlabeledSample,
    cdf_of_score,
    check_assumption_A,
    check_assumption_B,
)
from .estimators import (
    EstimatorConfig,
    SetEstimate,
    estimate_cdr_set,
    fit_posterior_histogram,
    threshold_klr,
    threshold_order_statistic,
)
from .klr import KernelSpec, fit_klr
from .metrics import EvalReport, evaluate_estimate, prop2_bound_check, sym_diff
from .oracle import (
    GnpProblem,
    ThresholdClassifier,
    brute_force_gnp,
    optimal_cdr_set,
    solve_gnp_threshold,
)
from .scenarios import Scenario, load_scenario
from .shifts import ShiftSpec, sample_noisy_labels

__all__ = [
    "EstimatorConfig",
    "EvalReport",
    "FeatureDomain",
    "GaussianMixture",
    "GnpProblem",
    "JointDistribution",
    "KernelSpec",
    "LabeledSample",
    "Scenario",
    "SetEstimate",
    "ShiftSpec",
    "TablePmf",
    "ThresholdClassifier",
    "UnlabeledSample",
    "brute_force_gnp",
    "cdf_of_score",
    "check_assumption_A",
    "check_assumption_B",
    "estimate_cdr_set",
    "evaluate_estimate",
    "fit_klr",
    "fit_posterior_histogram",
    "load_scenario",
    "optimal_cdr_set",
    "prop2_bound_check",
    "sample_noisy_labels",
    "solve_gnp_threshold",
    "sym_diff",
    "threshold_klr",
    "threshold_order_statistic",
]
