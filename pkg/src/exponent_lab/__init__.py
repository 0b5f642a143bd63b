"""Error exponents of fixed-length, sequential and two-phase classification tests."""

from .divergence import (
    Alphabet,
    DivergenceError,
    Distribution,
    EmpiricalType,
    binary_kl,
    chernoff_information,
    empirical_type,
    gjs,
    kl,
    renyi,
    renyi_alpha,
)
from .procedures import (
    SequentialConfig,
    SequentialState,
    TestDecision,
    TestOutcome,
    TwoPhaseConfig,
    g_threshold,
    gutman_test,
    sequential_test,
    threshold_two_phase_binary,
    two_phase_ht,
    two_phase_test,
)
from .solver import (
    ExponentReport,
    ProblemInstance,
    SolverConfig,
    alpha_inf_closed_forms,
    baseline_exponents,
    bayes_optimize,
    binary_f,
    binary_h,
    f_exponent,
    feasible_lambda,
    gamma_exponent,
    l_exponent,
    min_weighted_kl,
    omega_exponent,
    threshold_h,
    two_phase_exponents,
)

__version__ = "0.1.0"
