"""Achievable exponents of the two-phase tests and their Bayesian optimisation.

For thresholds ``lambda`` admitted by the excess-length target ``gamma``
(``min_j G_j(lambda) >= gamma`` with ``G = F`` for classification and
``G = Gamma`` for testing with known laws) the type-``j`` exponent is
``min(lambda_j, B_j)`` where ``B_j = L_j + gamma`` or ``k Omega_j + gamma``.

Threshold search
----------------
``G_j`` is non-increasing in every coordinate of ``lambda``, so the admitted
set is a down-set. Along any ray ``lambda = t u`` admission is therefore an
interval ``[0, t*]`` found by bisection. Because ``B_j`` does not depend on
``lambda``, the Bayesian objective ``min_j min(lambda_j, B_j)`` is maximised on
the diagonal ``u = (1, .., 1)``: any admitted ``lambda`` with smallest entry
``t`` dominates ``t 1``, which is then admitted too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from ..divergence import chernoff_information, gjs, kl
from .core import SolverConfig
from .exponents import (
    binary_f,
    f_exponent,
    feasible_lambda,
    gamma_bar,
    gamma_exponent,
    l_exponent,
    omega_exponent,
    ordered_pairs,
    threshold_h,
)
from .instance import ProblemInstance

Problem = Literal["classification", "hypothesis"]
Regime = Literal["fixed-length", "bridged", "sequential-approached"]

# relative closeness to the sequential exponent that earns the
# "sequential-approached" label
SEQUENTIAL_CLOSENESS = 0.99


class LambdaNotAdmissible(ValueError):
    """Thresholds violate ``min_j G_j(lambda) >= gamma``."""

    def __init__(self, j: int, value: float, gamma: float) -> None:
        super().__init__(f"excess-length exponent of hypothesis {j} is {value:.6g} < gamma = {gamma:.6g}")
        self.j = j
        self.value = value
        self.gamma = gamma


@dataclass(frozen=True)
class ExponentReport:
    """Per-hypothesis and Bayesian exponents for one parameter choice.

    ``bayesian`` is normalised by the expected stopping time.
    ``bayesian_per_n`` divides by the training length instead (``N = alpha n``
    with ``E[tau] / n -> 1``); it is ``None`` for known-law testing.
    """

    per_hypothesis: tuple
    bayesian: float
    lambda_used: tuple
    regime_note: Regime
    problem: Problem = "classification"
    gamma: float = 0.0
    k: float = 1.0
    bayesian_per_n: float | None = None
    second_phase: tuple = ()
    excess: tuple = ()
    notes: tuple = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.per_hypothesis and self.bayesian > min(self.per_hypothesis) + 1e-12:
            raise ValueError("Bayesian exponent exceeds a per-hypothesis exponent")


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------


def sequential_exponents(inst: ProblemInstance, problem: Problem = "classification") -> np.ndarray:
    """Per-hypothesis exponents of the sequential test.

    Classification: ``min_{i != j} GJS(P_i, P_j, alpha)``. Known laws: the
    ``alpha -> inf`` limit ``min_{i != j} D(P_j || P_i)``.
    """
    out = np.empty(inst.M)
    for j in range(inst.M):
        if problem == "classification":
            out[j] = min(gjs(inst.probs(i), inst.probs(j), inst.alpha) for i in range(inst.M) if i != j)
        else:
            out[j] = min(kl(inst.probs(j), inst.probs(i)) for i in range(inst.M) if i != j)
    return out


def fixed_length_exponents(inst: ProblemInstance, problem: Problem = "classification") -> np.ndarray:
    """Per-hypothesis exponents of the fixed-length test.

    Classification: Gutman's largest reject-free exponent
    ``min_{i != j} GJS(P_i, P_j, alpha)`` over all ordered pairs, the same for
    every hypothesis. Known laws: the nearest-neighbour test at ``n`` samples,
    ``Omega_j`` in its Chernoff form.
    """
    if problem == "classification":
        lam_bar = min(gjs(inst.probs(i), inst.probs(j), inst.alpha) for i, j in ordered_pairs(inst.M))
        return np.full(inst.M, lam_bar)
    return np.array(
        [
            min(chernoff_information(inst.probs(i), inst.probs(j))[0] for i in range(inst.M) if i != j)
            for j in range(inst.M)
        ]
    )


def _per_n(problem: Problem, inst: ProblemInstance, value: float) -> float | None:
    return value / inst.alpha if problem == "classification" else None


def baseline_exponents(inst: ProblemInstance, problem: Problem = "classification") -> dict:
    """Both reference tests as reports, keyed ``"fixed-length"`` and ``"sequential"``."""
    fixed = fixed_length_exponents(inst, problem)
    seq = sequential_exponents(inst, problem)
    out = {}
    for key, vals, regime in (("fixed-length", fixed, "fixed-length"), ("sequential", seq, "sequential-approached")):
        b = float(vals.min())
        out[key] = ExponentReport(
            per_hypothesis=tuple(float(v) for v in vals),
            bayesian=b,
            lambda_used=tuple([0.0] * inst.M) if key == "fixed-length" else tuple(float(v) for v in seq),
            regime_note=regime,
            problem=problem,
            gamma=inst.gamma,
            k=inst.k,
            bayesian_per_n=_per_n(problem, inst, b),
            notes=(f"{key} baseline",),
        )
    return out


def _fixed_report(inst: ProblemInstance, problem: Problem, note: str) -> ExponentReport:
    base = baseline_exponents(inst, problem)["fixed-length"]
    return ExponentReport(
        per_hypothesis=base.per_hypothesis,
        bayesian=base.bayesian,
        lambda_used=tuple([0.0] * inst.M),
        regime_note="fixed-length",
        problem=problem,
        gamma=inst.gamma,
        k=inst.k,
        bayesian_per_n=base.bayesian_per_n,
        notes=(note,),
    )


# ---------------------------------------------------------------------------
# exponents at given thresholds
# ---------------------------------------------------------------------------


def second_phase_exponents(
    inst: ProblemInstance, problem: Problem = "classification", config: SolverConfig | None = None
) -> np.ndarray:
    """``L_j(k, alpha)`` (classification) or ``k Omega_j`` (known laws), without gamma."""
    if problem == "classification":
        return np.array([l_exponent(inst, j, config) for j in range(inst.M)])
    return np.array([inst.k * omega_exponent(inst, j, config) for j in range(inst.M)])


def excess_exponents(
    inst: ProblemInstance, lambdas: Sequence[float], problem: Problem = "classification", config=None
) -> np.ndarray:
    """``F_j(lambda)`` or ``Gamma_j(lambda)`` for every hypothesis."""
    if problem == "classification":
        return np.array([f_exponent(inst, lambdas, j, config) for j in range(inst.M)])
    return np.array([gamma_exponent(inst, lambdas, j, config) for j in range(inst.M)])


def _regime(E: np.ndarray, seq: np.ndarray) -> Regime:
    return "sequential-approached" if np.all(E >= SEQUENTIAL_CLOSENESS * seq) else "bridged"


def two_phase_exponents(
    inst: ProblemInstance,
    lambdas: Sequence[float],
    problem: Problem = "classification",
    config: SolverConfig | None = None,
    second_phase: Sequence[float] | None = None,
) -> ExponentReport:
    """Achievable exponents ``min(lambda_j, B_j)`` at admitted thresholds.

    Parameters
    ----------
    second_phase
        Precomputed ``L_j`` or ``k Omega_j`` (without gamma), to skip the
        solver when sweeping thresholds on a fixed instance.

    Raises
    ------
    LambdaNotAdmissible
        When ``min_j G_j(lambda) < gamma``; the offending hypothesis is named.
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != (inst.M,) or np.any(lam < 0):
        raise ValueError(f"need {inst.M} non-negative thresholds, got {lambdas}")
    if np.all(lam == 0):
        return _fixed_report(inst, problem, "all-zero thresholds stop every run at n")
    if problem == "hypothesis" and not feasible_lambda(inst, lam, "hypothesis"):
        return _fixed_report(inst, problem, "thresholds outside the feasible region; test never enters phase 2")
    G = excess_exponents(inst, lam, problem, config)
    for j, g in enumerate(G):
        if g < inst.gamma - 1e-12:
            raise LambdaNotAdmissible(j, float(g), inst.gamma)
    S = np.asarray(second_phase, float) if second_phase is not None else second_phase_exponents(inst, problem, config)
    E = np.minimum(lam, S + inst.gamma)
    b = float(E.min())
    return ExponentReport(
        per_hypothesis=tuple(float(v) for v in E),
        bayesian=b,
        lambda_used=tuple(float(v) for v in lam),
        regime_note=_regime(E, sequential_exponents(inst, problem)),
        problem=problem,
        gamma=inst.gamma,
        k=inst.k,
        bayesian_per_n=_per_n(problem, inst, b),
        second_phase=tuple(float(v) for v in S),
        excess=tuple(float(v) for v in G),
        notes=("strict inequalities relaxed to their closures",),
    )


# ---------------------------------------------------------------------------
# threshold search
# ---------------------------------------------------------------------------


def _admitted(inst, lam, problem, config) -> bool:
    # early exit on the first hypothesis that misses gamma
    for j in range(inst.M):
        g = f_exponent(inst, lam, j, config) if problem == "classification" else gamma_exponent(inst, lam, j, config)
        if g < inst.gamma:
            return False
    return True


def max_admitted_scale(
    inst: ProblemInstance,
    direction: Sequence[float],
    t_hi: float,
    problem: Problem = "classification",
    config: SolverConfig | None = None,
    tol: float = 1e-6,
) -> float:
    """Largest ``t`` in ``[0, t_hi]`` with ``t * direction`` admitted, to ``tol``."""
    u = np.asarray(direction, dtype=float)
    if u.shape != (inst.M,) or np.any(u < 0) or not np.any(u > 0):
        raise ValueError("direction must be a non-negative, non-zero M-vector")
    if _admitted(inst, t_hi * u, problem, config):
        return t_hi
    lo, hi = 0.0, t_hi
    while (hi - lo) * float(u.max()) > tol:
        mid = 0.5 * (lo + hi)
        if _admitted(inst, mid * u, problem, config):
            lo = mid
        else:
            hi = mid
    return lo


def _fixed_regime_reason(inst, problem, config) -> str | None:
    if problem == "classification":
        gb = min(gamma_bar(inst, j, config) for j in range(inst.M))
        if inst.gamma > gb:
            return f"gamma exceeds min_j gamma_bar_j = {gb:.6g}; only zero thresholds are admitted"
    return None


def bayes_optimize(
    inst: ProblemInstance,
    problem: Problem = "classification",
    config: SolverConfig | None = None,
    tol: float = 1e-6,
) -> ExponentReport:
    """Maximise ``min_j min(lambda_j, B_j)`` over admitted thresholds.

    Returns the report at the maximising uniform thresholds ``t* 1``. When no
    non-zero threshold is admitted (or, for known laws, when the admitted ones
    never trigger the second phase) the fixed-length report is returned.
    """
    reason = _fixed_regime_reason(inst, problem, config)
    if reason is not None:
        return _fixed_report(inst, problem, reason)
    S = second_phase_exponents(inst, problem, config)
    cap = float(S.min() + inst.gamma)
    t = max_admitted_scale(inst, np.ones(inst.M), cap, problem, config, tol)
    lam = np.full(inst.M, t)
    fixed = fixed_length_exponents(inst, problem)
    if problem == "hypothesis" and not feasible_lambda(inst, lam, "hypothesis"):
        return _fixed_report(inst, problem, "no admitted threshold reaches the feasible region")
    if t <= 0:
        return _fixed_report(inst, problem, "no positive threshold is admitted")
    rep = two_phase_exponents(inst, lam, problem, config, second_phase=S)
    if rep.bayesian < float(fixed.min()) - 10 * tol:
        # the zero-threshold (fixed-length) choice is always available
        return _fixed_report(inst, problem, "fixed-length choice beats every admitted threshold")
    return rep


@dataclass(frozen=True)
class FrontierPoint:
    direction: tuple
    lambdas: tuple
    exponents: tuple


def tradeoff_frontier(
    inst: ProblemInstance,
    n_points: int = 21,
    problem: Problem = "classification",
    config: SolverConfig | None = None,
    tol: float = 1e-6,
) -> list:
    """Exponent pairs traced by rays ``lambda = t (cos theta, sin theta)`` (two hypotheses).

    Each ray is pushed to the edge of the admitted set; the resulting exponent
    pair ``(E_1, E_2)`` is one point of the trade-off curve at this gamma.
    """
    if inst.M != 2:
        raise ValueError("the trade-off frontier is drawn for two hypotheses")
    if _fixed_regime_reason(inst, problem, config) is not None:
        rep = _fixed_report(inst, problem, "fixed-length regime")
        return [FrontierPoint((0.5, 0.5), rep.lambda_used, rep.per_hypothesis)]
    S = second_phase_exponents(inst, problem, config)
    B = S + inst.gamma
    out = []
    # open quarter circle: a zero threshold on one side is Gutman's test
    for theta in (np.arange(n_points) + 0.5) * (math.pi / 2) / n_points:
        u = np.array([math.cos(theta), math.sin(theta)])
        t_hi = float(max(B[m] / u[m] for m in range(2) if u[m] > 0))
        t = max_admitted_scale(inst, u, t_hi, problem, config, tol)
        lam = t * u
        if np.all(lam == 0):
            E = fixed_length_exponents(inst, problem)
        else:
            E = np.minimum(lam, B)
        out.append(FrontierPoint(tuple(u), tuple(float(x) for x in lam), tuple(float(x) for x in E)))
    return out


# ---------------------------------------------------------------------------
# threshold-based binary test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdReport:
    """Exponents of the threshold-based binary test; ``lam`` is the phase-2 threshold."""

    per_hypothesis: tuple
    bayesian: float
    lambdas: tuple
    lam: float
    gamma: float
    k: float


def _threshold_admitted(inst: ProblemInstance, lambdas, config) -> bool:
    return min(binary_f(inst, i, float(lambdas[1 - i]), config) for i in range(2)) >= inst.gamma


def threshold_test_exponents(
    inst: ProblemInstance, lambdas: Sequence[float], lam: float, config: SolverConfig | None = None
) -> ThresholdReport:
    """``(min(lambda_1, k lam + gamma), min(lambda_2, H(lam) + gamma))`` at admitted thresholds."""
    lam_v = np.asarray(lambdas, float)
    if inst.M != 2 or lam_v.shape != (2,) or np.any(lam_v < 0) or lam < 0:
        raise ValueError("need two hypotheses, two non-negative thresholds and lam >= 0")
    for i in range(2):
        g = binary_f(inst, i, float(lam_v[1 - i]), config)
        if g < inst.gamma - 1e-12:
            raise LambdaNotAdmissible(i, g, inst.gamma)
    E = (
        min(float(lam_v[0]), inst.k * lam + inst.gamma),
        min(float(lam_v[1]), threshold_h(inst, lam, config) + inst.gamma),
    )
    return ThresholdReport(E, min(E), tuple(map(float, lam_v)), float(lam), inst.gamma, inst.k)


def threshold_bayes_optimize(
    inst: ProblemInstance, config: SolverConfig | None = None, tol: float = 1e-6
) -> ThresholdReport:
    """Best Bayesian exponent of the threshold-based binary test.

    The phase-2 term ``min(k lam, H(lam))`` is maximised where the increasing
    ``k lam`` meets the non-increasing ``H(lam)``; the phase-1 thresholds are
    the largest admitted uniform pair, as for the nearest-neighbour test.
    """
    if inst.M != 2:
        raise ValueError("the threshold-based test is binary")
    lo, hi = 0.0, threshold_h(inst, 0.0, config) / inst.k
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if inst.k * mid <= threshold_h(inst, mid, config):
            lo = mid
        else:
            hi = mid
    lam = lo
    phase2 = min(inst.k * lam, threshold_h(inst, lam, config)) + inst.gamma
    # bisection on the uniform pair; binary F_i is non-increasing in its threshold
    if _threshold_admitted(inst, (phase2, phase2), config):
        t = phase2
    else:
        a, b = 0.0, phase2
        while b - a > tol:
            mid = 0.5 * (a + b)
            if _threshold_admitted(inst, (mid, mid), config):
                a = mid
            else:
                b = mid
        t = a
    if t <= 0:
        fixed = fixed_length_exponents(inst)
        return ThresholdReport(tuple(map(float, fixed)), float(fixed.min()), (0.0, 0.0), 0.0, inst.gamma, inst.k)
    return threshold_test_exponents(inst, (t, t), lam, config)
