"""Experiment harness: convergence study, failure modes, Lotka-Volterra demo."""

from .convergence import (
    build_surrogate,
    discrepancy_curve,
    load_config,
    make_sequences,
    model_covariance,
    run_convergence_study,
    summarize,
)
from .report import COLUMNS, ExperimentReport, config_hash
from .sequences import LocationScaleSequence, geometric_schedule
from .targets import TARGETS, get_target
from .failure_modes import MODES, dirac_escape_bound, run_failure_modes
from .lotka_volterra import (
    LotkaVolterraModel,
    integrate_lv,
    lv_log_posterior,
    lv_rhs,
    run_lv_demo,
    synthetic_model,
)
from .mcmc import MetropolisResult, random_walk_metropolis
