"""Exponent functions of the two-phase classification and testing procedures.

Every function here is a thin layer that phrases one exponent as a
:func:`~exponent_lab.solver.core.min_weighted_kl` problem. Hypothesis indices
are 0-based. Strict inequalities in the definitions are relaxed to their
closures; the objectives are continuous, so the infimum is unchanged.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import brentq

from ..divergence import Distribution, DivergenceError, kl
from .core import (
    GJSBound,
    GJSOrder,
    KLBound,
    KLOrder,
    Solution,
    SolverConfig,
    min_weighted_kl,
)
from .instance import ProblemInstance

Problem = Literal["classification", "hypothesis"]
Pairing = Literal["definition", "proof"]


@dataclass(frozen=True)
class ExponentValue:
    """An exponent together with the minimising index pair and point."""

    value: float
    pair: tuple
    solution: Solution

    def __float__(self) -> float:
        return self.value


def _check_lambdas(inst: ProblemInstance, lambdas: Sequence[float]) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float).reshape(-1)
    if lam.size != inst.M:
        raise DivergenceError(f"expected {inst.M} thresholds, got {lam.size}")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise DivergenceError(f"thresholds must be finite and non-negative: {lam}")
    return lam


def ordered_pairs(M: int) -> list:
    """All ordered pairs of distinct hypotheses, lexicographic."""
    return [(i, l) for i, l in itertools.product(range(M), repeat=2) if i != l]


def _best(cands: list) -> ExponentValue:
    # strict "<" keeps the lexicographically first pair on ties
    best = cands[0]
    for c in cands[1:]:
        if c.value < best.value:
            best = c
    return best


# ---------------------------------------------------------------------------
# M-ary classification
# ---------------------------------------------------------------------------


def f_exponent_detail(
    inst: ProblemInstance,
    lambdas: Sequence[float],
    j: int,
    config: SolverConfig | None = None,
    pairing: Pairing = "definition",
) -> ExponentValue:
    """Excess-length exponent ``F_j`` with its minimising pair ``(i, l)``.

    For an ordered pair ``(i, l)`` the variables are ``Q1 ~ P_l`` and
    ``Q2 ~ P_i`` (weight alpha) and ``Q3 ~ P_j`` (weight 1). With the default
    ``pairing="definition"`` the radii are crossed: ``GJS(Q1, Q3) <= lambda_i``
    and ``GJS(Q2, Q3) <= lambda_l``. ``pairing="proof"`` tests each training
    variable against its own threshold (``GJS(Q1, Q3) <= lambda_l``), which
    is the event on which the two-phase test enters its second phase; it is
    zero exactly when ``lambda_i >= GJS(P_i, P_j)`` for some ``i != j``. The
    two agree for uniform thresholds; for unequal thresholds the definition
    value can exceed the measured phase-2 entry exponent.
    """
    j = inst.check_index(j)
    lam = _check_lambdas(inst, lambdas)
    a = inst.alpha
    cands = []
    for i, l in ordered_pairs(inst.M):
        r1, r2 = (lam[i], lam[l]) if pairing == "definition" else (lam[l], lam[i])
        sol = min_weighted_kl(
            [inst.probs(l), inst.probs(i), inst.probs(j)],
            [a, a, 1.0],
            [GJSBound(0, 2, a, r1), GJSBound(1, 2, a, r2)],
            config,
        )
        cands.append(ExponentValue(sol.value, (i, l), sol))
    return _best(cands)


def f_exponent(
    inst: ProblemInstance,
    lambdas: Sequence[float],
    j: int,
    config: SolverConfig | None = None,
    pairing: Pairing = "definition",
) -> float:
    """``F_j(alpha, lambda | P)``; see :func:`f_exponent_detail`."""
    return f_exponent_detail(inst, lambdas, j, config, pairing).value


def gamma_bar(inst: ProblemInstance, j: int, config: SolverConfig | None = None) -> float:
    """Largest excess-length exponent, ``F_j`` at all-zero thresholds."""
    return f_exponent(inst, np.zeros(inst.M), j, config)


def l_exponent_detail(inst: ProblemInstance, j: int, config: SolverConfig | None = None) -> ExponentValue:
    """Second-phase exponent ``L_j(k, alpha | P)`` with its minimising ``i``."""
    j = inst.check_index(j)
    a = inst.alpha
    cands = []
    for i in range(inst.M):
        if i == j:
            continue
        sol = min_weighted_kl(
            [inst.probs(i), inst.probs(j), inst.probs(j)],
            [a, a, inst.k],
            [GJSOrder(0, 1, 2, a)],
            config,
        )
        cands.append(ExponentValue(sol.value, (i, j), sol))
    return _best(cands)


def l_exponent(inst: ProblemInstance, j: int, config: SolverConfig | None = None) -> float:
    """``L_j``: NN misclassification of ``P_j`` as ``P_i`` after ``kn`` samples."""
    return l_exponent_detail(inst, j, config).value


# ---------------------------------------------------------------------------
# binary classification
# ---------------------------------------------------------------------------


def _binary(inst: ProblemInstance, i: int) -> tuple[int, int]:
    if inst.M != 2:
        raise DivergenceError("binary exponents need exactly two hypotheses")
    i = inst.check_index(i)
    return i, 1 - i


def binary_f(inst: ProblemInstance, i: int, lambda_bar: float, config: SolverConfig | None = None) -> float:
    """``F_i(alpha, lambda_{i'} | P_1, P_2)`` where ``i' = 1 - i``.

    Minimises ``alpha D(Q_{i'} || P_{i'}) + D(Q_i || P_i)`` subject to
    ``GJS(Q_{i'}, Q_i, alpha) <= lambda_bar``.
    """
    i, ib = _binary(inst, i)
    if lambda_bar < 0:
        raise DivergenceError("threshold must be non-negative")
    a = inst.alpha
    return min_weighted_kl(
        [inst.probs(ib), inst.probs(i)], [a, 1.0], [GJSBound(0, 1, a, lambda_bar)], config
    ).value


def binary_h(inst: ProblemInstance, i: int, config: SolverConfig | None = None) -> float:
    """``H_i(k, alpha | P_1, P_2)``, the second-phase exponent of the binary NN test."""
    i, ib = _binary(inst, i)
    a = inst.alpha
    return min_weighted_kl(
        [inst.probs(0), inst.probs(1), inst.probs(i)],
        [a, a, inst.k],
        [GJSOrder(ib, i, 2, a)],
        config,
    ).value


def threshold_h(inst: ProblemInstance, lam: float, config: SolverConfig | None = None) -> float:
    """``H(k, alpha, lambda | P_1, P_2)`` of the threshold-based binary test."""
    _binary(inst, 0)
    if lam < 0:
        raise DivergenceError("threshold must be non-negative")
    a = inst.alpha
    return min_weighted_kl(
        [inst.probs(0), inst.probs(1)], [a, inst.k], [GJSBound(0, 1, a, lam)], config
    ).value


# ---------------------------------------------------------------------------
# hypothesis testing (known laws)
# ---------------------------------------------------------------------------


def tilted(p: np.ndarray, q: np.ndarray, s: float) -> np.ndarray:
    """Geometric mixture proportional to ``p^(1-s) q^s``."""
    with np.errstate(divide="ignore"):
        lw = (1.0 - s) * np.log(p) + s * np.log(q)
    lw = np.where(np.isfinite(lw), lw, -np.inf)
    w = np.exp(lw - np.max(lw))
    return w / w.sum()


def kl_ball_witness(pi: np.ndarray, pl: np.ndarray, lam_i: float, lam_l: float) -> np.ndarray | None:
    """A point of ``{Q : D(Q||P_i) <= lam_i, D(Q||P_l) <= lam_l}`` or ``None``.

    The smallest achievable ``D(Q||P_l)`` under ``D(Q||P_i) <= lam_i`` is
    attained on the geometric family between ``P_i`` and ``P_l``, so a
    one-dimensional root find decides non-emptiness exactly.
    """
    if kl(pl, pi) <= lam_i:
        q = pl.copy()
    elif lam_i <= 0:
        q = pi.copy()
    else:
        def g(s: float) -> float:
            return kl(tilted(pi, pl, s), pi) - lam_i

        hi = 1.0
        if not math.isfinite(g(hi)):
            # shrink towards P_i until the divergence is finite
            while hi > 1e-12 and not math.isfinite(g(hi)):
                hi /= 2
        s = brentq(g, 0.0, hi, xtol=1e-14) if g(hi) > 0 else hi
        q = tilted(pi, pl, s)
    if kl(q, pl) <= lam_l + 1e-12 and kl(q, pi) <= lam_i + 1e-12:
        return q
    return None


def gamma_exponent_detail(
    inst: ProblemInstance, lambdas: Sequence[float], j: int, config: SolverConfig | None = None
) -> ExponentValue:
    """``Gamma_j(lambda | P)`` with its minimising pair; ``inf`` off the feasible region."""
    j = inst.check_index(j)
    lam = _check_lambdas(inst, lambdas)
    cands = []
    for i, l in ordered_pairs(inst.M):
        if l < i:
            # the constraint set is symmetric in (i, l)
            continue
        pi, pl = inst.probs(i), inst.probs(l)
        w = kl_ball_witness(pi, pl, lam[i], lam[l])
        if w is None:
            cands.append(ExponentValue(math.inf, (i, l), Solution(math.inf, (), True, "empty")))
            continue
        sol = min_weighted_kl(
            [inst.probs(j)], [1.0], [KLBound(0, pi, lam[i]), KLBound(0, pl, lam[l])], config, seeds=[[w]]
        )
        cands.append(ExponentValue(sol.value, (i, l), sol))
    return _best(cands)


def gamma_exponent(
    inst: ProblemInstance, lambdas: Sequence[float], j: int, config: SolverConfig | None = None
) -> float:
    return gamma_exponent_detail(inst, lambdas, j, config).value


def omega_exponent(inst: ProblemInstance, j: int, config: SolverConfig | None = None) -> float:
    """``Omega_j(P)``: min over ``i != j`` of ``D(Q||P_j)`` with ``D(Q||P_i) <= D(Q||P_j)``."""
    j = inst.check_index(j)
    vals = []
    for i in range(inst.M):
        if i == j:
            continue
        vals.append(
            min_weighted_kl([inst.probs(j)], [1.0], [KLOrder(0, inst.probs(i), inst.probs(j))], config).value
        )
    return min(vals)


# ---------------------------------------------------------------------------
# feasibility and large-alpha closed forms
# ---------------------------------------------------------------------------


def feasible_lambda(inst: ProblemInstance, lambdas: Sequence[float], problem: Problem = "classification") -> bool:
    """Whether the excess-length constraint set is non-empty for ``lambdas``."""
    try:
        lam = _check_lambdas(inst, lambdas)
    except DivergenceError:
        return False
    if problem == "classification":
        # Q1 = Q2 = Q3 meets every GJS radius
        return True
    if problem != "hypothesis":
        raise ValueError(f"unknown problem kind {problem!r}")
    for i, l in ordered_pairs(inst.M):
        if i < l and kl_ball_witness(inst.probs(i), inst.probs(l), lam[i], lam[l]) is not None:
            return True
    return False


@dataclass(frozen=True)
class ClosedForms:
    """Large-alpha closed forms of the threshold-based binary test."""

    q_star: tuple  # (Q_1*, Q_2*)
    q_prime: Distribution
    exponents: tuple  # (E_1, E_2)
    note: str = ""


def _tilt_to_radius(p: np.ndarray, q: np.ndarray, radius: float) -> tuple[np.ndarray, str]:
    """Point on the family ``p^(1-s) q^s`` with ``D(. || q) = radius``.

    Starts at ``p`` (``s = 0``) and moves toward ``q``. When ``radius`` is at
    least ``D(p||q)`` the endpoint ``p`` is returned.
    """
    top = kl(p, q)
    if radius >= top:
        return p.copy(), "radius exceeds D(p||q); unconstrained endpoint"
    if radius <= 0:
        return q.copy(), ""

    def g(s: float) -> float:
        return kl(tilted(p, q, s), q) - radius

    s = brentq(g, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return tilted(p, q, s), ""


def alpha_inf_closed_forms(
    P1,
    P2,
    lam: float,
    k: float,
    lambdas: Sequence[float] | None = None,
    gamma: float = 0.0,
) -> ClosedForms:
    """Tilting solutions of the threshold-based binary test as alpha grows.

    ``Q_i*`` minimises ``D(Q||P_i)`` subject to ``D(Q||P_{i'}) <= lambda_{i'}``
    and ``Q'`` minimises ``D(Q||P_2)`` subject to ``D(Q||P_1) <= lam``. Both
    are found by a one-dimensional root search on the geometric family.

    Parameters
    ----------
    lambdas
        First-phase radii ``(lambda_1, lambda_2)``; defaults to ``(lam, lam)``.
    """
    p1, p2 = (np.asarray(Distribution(x) if not isinstance(x, Distribution) else x) for x in (P1, P2))
    if k < 1:
        raise DivergenceError("k must be >= 1")
    l1, l2 = (lam, lam) if lambdas is None else (float(lambdas[0]), float(lambdas[1]))
    notes = []
    q1, n1 = _tilt_to_radius(p1, p2, l2)
    q2, n2 = _tilt_to_radius(p2, p1, l1)
    # Q' lives between P_2 (unconstrained optimum) and P_1
    qp, n3 = _tilt_to_radius(p2, p1, lam)
    notes += [n for n in (n1, n2, n3) if n]
    e1 = min(kl(q2, p1), k * kl(qp, p1) + gamma)
    e2 = min(kl(q1, p2), k * kl(qp, p2) + gamma)
    return ClosedForms(
        (Distribution.normalized(q1), Distribution.normalized(q2)),
        Distribution.normalized(qp),
        (e1, e2),
        "; ".join(notes),
    )
