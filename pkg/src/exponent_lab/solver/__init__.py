"""Exponent functions and their Bayesian optimisation."""

from .bayes import (
    ExponentReport,
    FrontierPoint,
    LambdaNotAdmissible,
    ThresholdReport,
    baseline_exponents,
    bayes_optimize,
    excess_exponents,
    fixed_length_exponents,
    max_admitted_scale,
    second_phase_exponents,
    sequential_exponents,
    threshold_bayes_optimize,
    threshold_test_exponents,
    tradeoff_frontier,
    two_phase_exponents,
)
from .core import (
    DEFAULT_CONFIG,
    GJSBound,
    GJSOrder,
    KLBound,
    KLOrder,
    Solution,
    SolverConfig,
    SolverError,
    min_weighted_kl,
)
from .exponents import (
    ClosedForms,
    alpha_inf_closed_forms,
    binary_f,
    binary_h,
    f_exponent,
    feasible_lambda,
    gamma_bar,
    gamma_exponent,
    l_exponent,
    omega_exponent,
    threshold_h,
)
from .instance import ProblemInstance

__all__ = [name for name in dir() if not name.startswith("_")]
