"""Seeded simulation of the tests and an exact enumeration oracle.

Sampling works on type counts: a length-``N`` sequence drawn i.i.d. from
``P`` has a multinomial type, and every test here reads its input only
through types, so drawing counts is exact and much cheaper than drawing
symbols.

Random streams come from :class:`numpy.random.Philox` seeded with
``SeedSequence([seed, hypothesis, n, block])``, with blocks of
``BLOCK`` trials. Tallies are integer sums, so results are bit-identical for
any thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from . import kernels
from .kernels import ceil_len, simplex_lattice
from .solver.instance import ProblemInstance

BLOCK = 1024
THREADS_ENV = "EXPONENT_LAB_THREADS"
EXACT_GUARD = 10**7

TEST_KINDS = {
    "two-phase": kernels.KIND_TWO_PHASE,
    "gutman": kernels.KIND_GUTMAN,
    "threshold": kernels.KIND_THRESHOLD,
    "two-phase-ht": kernels.KIND_TWO_PHASE_HT,
}

_Z95 = NormalDist().inv_cdf(0.975)
_Z95_ONE_SIDED = NormalDist().inv_cdf(0.95)


class SizeGuardError(RuntimeError):
    """Exact enumeration would visit more than ``EXACT_GUARD`` joint types."""


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# interval helpers
# ---------------------------------------------------------------------------


def wilson_interval(count, trials, z: float = _Z95) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided Wilson score interval for a binomial proportion."""
    c = np.asarray(count, float)
    t = np.asarray(trials, float)
    p = c / t
    den = 1.0 + z * z / t
    centre = (p + z * z / (2 * t)) / den
    half = z * np.sqrt(p * (1 - p) / t + z * z / (4 * t * t)) / den
    return np.clip(centre - half, 0.0, 1.0), np.clip(centre + half, 0.0, 1.0)


def wilson_upper_one_sided(count, trials, z: float = _Z95_ONE_SIDED) -> np.ndarray:
    return wilson_interval(count, trials, z)[1]


# ---------------------------------------------------------------------------
# plans and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimPlan:
    """What to simulate.

    ``lambdas`` are the phase-1 thresholds (two-phase, threshold and HT tests);
    ``lam`` is the Gutman threshold or the phase-2 threshold of the
    threshold-based test. ``hypotheses`` restricts the true hypotheses
    simulated (default: all).
    """

    instance: ProblemInstance
    test_kind: str
    trials: int
    seed: int
    n_grid: tuple
    lambdas: tuple = ()
    lam: float = 0.0
    hypotheses: tuple | None = None
    threads: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if self.test_kind not in TEST_KINDS:
            raise ValueError(f"unknown test kind {self.test_kind!r}; choose from {sorted(TEST_KINDS)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.n_grid:
            raise ValueError("n_grid must not be empty")
        if any(n < 1 for n in self.n_grid) or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing positive integers")
        if self.test_kind == "gutman":
            if not self.lam > 0:
                raise ValueError("the Gutman test needs lam > 0")
        elif len(self.lambdas) != self.instance.M:
            raise ValueError(f"need {self.instance.M} thresholds, got {len(self.lambdas)}")
        if self.test_kind == "threshold" and self.instance.M != 2:
            raise ValueError("the threshold-based test is binary")
        if self.hypotheses is not None:
            object.__setattr__(self, "hypotheses", tuple(self.instance.check_index(j) for j in self.hypotheses))

    @property
    def kind_code(self) -> int:
        return TEST_KINDS[self.test_kind]

    @property
    def truths(self) -> tuple:
        return self.hypotheses if self.hypotheses is not None else tuple(range(self.instance.M))


@dataclass(frozen=True)
class SimResult:
    """Tallies at one test length ``n``; per-hypothesis arrays are indexed by the true hypothesis.

    Hypotheses that were not simulated carry zero trials and ``nan`` estimates.
    """

    n: int
    trials: np.ndarray
    error_counts: np.ndarray
    excess_counts: np.ndarray
    reject_counts: np.ndarray
    tau_sum: np.ndarray

    def _ratio(self, c) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.trials > 0, c / np.maximum(self.trials, 1), np.nan)

    @property
    def per_hypothesis_error(self) -> np.ndarray:
        return self._ratio(self.error_counts)

    @property
    def excess_rate(self) -> np.ndarray:
        return self._ratio(self.excess_counts)

    @property
    def reject_rate(self) -> np.ndarray:
        return self._ratio(self.reject_counts)

    @property
    def mean_tau(self) -> np.ndarray:
        return self._ratio(self.tau_sum)

    @property
    def wilson_halfwidth(self) -> np.ndarray:
        lo, hi = wilson_interval(self.error_counts, np.maximum(self.trials, 1))
        return np.where(self.trials > 0, (hi - lo) / 2, np.nan)

    def error_interval(self) -> tuple[np.ndarray, np.ndarray]:
        return wilson_interval(self.error_counts, np.maximum(self.trials, 1))

    def error_estimate(self) -> np.ndarray:
        """Error rate, with the one-sided Wilson upper bound in zero-count cells."""
        up = wilson_upper_one_sided(0, np.maximum(self.trials, 1))
        return np.where(self.error_counts > 0, self.per_hypothesis_error, up)

    def excess_estimate(self) -> np.ndarray:
        up = wilson_upper_one_sided(0, np.maximum(self.trials, 1))
        return np.where(self.excess_counts > 0, self.excess_rate, up)


def _draw_counts(rng: np.random.Generator, total: int, p: np.ndarray, size: int) -> np.ndarray:
    if total == 0:
        return np.zeros((size, p.size))
    return rng.multinomial(total, p, size=size).astype(float)


def _block_tallies(plan: SimPlan, j: int, n: int, block: int, size: int) -> np.ndarray:
    """(errors, excess, rejects, tau_sum) for one block of trials under ``H_j``."""
    inst = plan.instance
    P = inst.matrix()
    M = inst.M
    kind = plan.kind_code
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([plan.seed, j, n, block])))
    total = n if kind == kernels.KIND_GUTMAN else ceil_len(inst.k * n)
    y1 = _draw_counts(rng, n, P[j], size)
    y2 = _draw_counts(rng, total - n, P[j], size)
    if kind == kernels.KIND_TWO_PHASE_HT:
        with np.errstate(divide="ignore"):
            logP = np.log(P)
        s1 = kernels.kl_scores(y1, n, logP)
        s2 = kernels.kl_scores(y1 + y2, total, logP)
        lambdas = np.asarray(plan.lambdas)
    else:
        N = ceil_len(n * inst.alpha)
        X = np.stack([_draw_counts(rng, N, P[i], size) for i in range(M)], axis=1)
        s1 = kernels.gjs_scores(X, N, y1, n, inst.alpha)
        a2 = inst.alpha / inst.k if kind == kernels.KIND_THRESHOLD else inst.alpha
        s2 = kernels.gjs_scores(X, N, y1 + y2, total, a2) if kind != kernels.KIND_GUTMAN else s1
        lambdas = np.full(M, plan.lam) if kind == kernels.KIND_GUTMAN else np.asarray(plan.lambdas)
    dec, ph2 = kernels.decide_batch(kind, s1, s2, lambdas, plan.lam)
    rej = dec == kernels.REJECT
    err = (~rej) & (dec != j)
    taus = np.where(ph2, total, n)
    return np.array([err.sum(), ph2.sum(), rej.sum(), taus.sum()], dtype=np.int64)


def _blocks(trials: int) -> list[tuple[int, int]]:
    return [(b, min(BLOCK, trials - b * BLOCK)) for b in range(math.ceil(trials / BLOCK))]


def run_sim(plan: SimPlan) -> list[SimResult]:
    """Simulate ``plan.trials`` runs per true hypothesis at every ``n`` in the grid."""
    M = plan.instance.M
    jobs = [(j, n, b, size) for n in plan.n_grid for j in plan.truths for b, size in _blocks(plan.trials)]
    if plan.threads > 1:
        with ThreadPoolExecutor(plan.threads) as ex:
            tallies = list(ex.map(lambda t: _block_tallies(plan, *t), jobs))
    else:
        tallies = [_block_tallies(plan, *t) for t in jobs]
    out = []
    for n in plan.n_grid:
        acc = np.zeros((M, 4), np.int64)
        trials = np.zeros(M, np.int64)
        for (j, nn, _, size), t in zip(jobs, tallies):
            if nn == n:
                acc[j] += t
                trials[j] += size
        out.append(SimResult(n, trials, acc[:, 0], acc[:, 1], acc[:, 2], acc[:, 3]))
    return out


# ---------------------------------------------------------------------------
# sequential test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SequentialResult:
    """Tallies of the sequential test at one ``beta``; arrays indexed by true hypothesis."""

    beta: float
    trials: np.ndarray
    error_counts: np.ndarray
    tau_sum: np.ndarray
    tau_sq_sum: np.ndarray
    full_psi_counts: np.ndarray
    truncated_counts: np.ndarray

    @property
    def per_hypothesis_error(self) -> np.ndarray:
        return self.error_counts / np.maximum(self.trials, 1)

    @property
    def mean_tau(self) -> np.ndarray:
        return self.tau_sum / np.maximum(self.trials, 1)

    @property
    def tau_stderr(self) -> np.ndarray:
        t = np.maximum(self.trials, 1)
        var = np.maximum(self.tau_sq_sum / t - self.mean_tau**2, 0.0)
        return np.sqrt(var / t)


_SEQ_SLAB = 256


def _seq_block(inst: ProblemInstance, beta: float, max_steps: int, seed: int, j: int, block: int, size: int):
    P = inst.matrix()
    M, d = P.shape
    cdf = np.cumsum(P, axis=1)
    cdf[:, -1] = 1.0
    dmax = ceil_len(inst.alpha) + 1
    slots = 1 + M * dmax
    tag = int(np.float64(beta).view(np.uint64))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, j, tag, block, 1])))
    train = np.zeros((size, M, d))
    test = np.zeros((size, d))
    steps = np.zeros(size, np.int64)
    ntrain = np.zeros(size, np.int64)
    status = np.zeros(size, np.int64)
    tau = np.zeros(size, np.int64)
    dec = np.full(size, -1, np.int64)
    while (status == kernels.SEQ_RUNNING).any():
        U = rng.random((size, _SEQ_SLAB, slots))
        kernels.sequential_run(U, cdf, cdf[j], inst.alpha, beta, max_steps, train, test, steps, ntrain, status, tau, dec)
    done = status != kernels.SEQ_TRUNCATED
    err = done & (dec != j)
    return np.array(
        [
            err.sum(),
            tau.sum(),
            (tau.astype(np.float64) ** 2).sum(),
            (status == kernels.SEQ_FULL_PSI).sum(),
            (~done).sum(),
        ],
        dtype=np.float64,
    )


def run_sequential(
    instance: ProblemInstance,
    betas: Sequence[float],
    trials: int,
    seed: int,
    max_steps: int = 10**6,
    hypotheses: Sequence[int] | None = None,
    threads: int = 1,
) -> list[SequentialResult]:
    """Simulate the sequential test at each ``beta``.

    Truncated runs count towards ``tau`` but not towards errors.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    for b in betas:
        if not 0 < b < 1:
            raise ValueError(f"beta must lie in (0, 1), got {b}")
    M = instance.M
    truths = tuple(range(M)) if hypotheses is None else tuple(instance.check_index(j) for j in hypotheses)
    jobs = [(b, j, blk, size) for b in betas for j in truths for blk, size in _blocks(trials)]

    def work(job):
        b, j, blk, size = job
        return _seq_block(instance, b, max_steps, seed, j, blk, size)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            tallies = list(ex.map(work, jobs))
    else:
        tallies = [work(t) for t in jobs]
    out = []
    for b in betas:
        acc = np.zeros((M, 5))
        tr = np.zeros(M, np.int64)
        for (bb, j, _, size), t in zip(jobs, tallies):
            if bb == b:
                acc[j] += t
                tr[j] += size
        out.append(
            SequentialResult(
                float(b), tr, acc[:, 0].astype(np.int64), acc[:, 1], acc[:, 2],
                acc[:, 3].astype(np.int64), acc[:, 4].astype(np.int64),
            )
        )
    return out


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExactResult:
    """Exact probabilities per true hypothesis (double precision)."""

    n: int
    per_hypothesis_error: np.ndarray
    excess_prob: np.ndarray
    reject_prob: np.ndarray
    mass: np.ndarray = field(repr=False)


def type_counts(d: int, n: int) -> np.ndarray:
    """All count vectors of length-``n`` sequences over ``d`` symbols."""
    if n == 0:
        return np.zeros((1, d))
    return np.rint(simplex_lattice(d, n) * n)


def log_type_prob(counts: np.ndarray, n: int, p: np.ndarray) -> np.ndarray:
    """Log probability that an i.i.d. ``p`` sequence of length ``n`` has each type."""
    with np.errstate(divide="ignore"):
        lp = xlogy(counts, p[None, :]).sum(axis=1)
    return gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + lp


def exact_size(instance: ProblemInstance, test_kind: str, n: int) -> int:
    """Number of joint type combinations visited by :func:`exact_enumerate`."""
    d, M = instance.alphabet_size, instance.M
    total = n if test_kind == "gutman" else ceil_len(instance.k * n)
    Ln = math.comb(n + d - 1, d - 1)
    Lc = math.comb(total - n + d - 1, d - 1)
    LN = 1 if test_kind == "two-phase-ht" else math.comb(ceil_len(n * instance.alpha) + d - 1, d - 1)
    return LN**M * Ln * Lc


def _pair_scores(A: np.ndarray, NA: int, T: np.ndarray, nT: int, alpha: float) -> np.ndarray:
    """GJS score of every training type against every test type, shape (LA, LT)."""
    train = np.ascontiguousarray(np.broadcast_to(A, (T.shape[0],) + A.shape))
    return kernels.gjs_scores(train, NA, T, nT, alpha).T


def exact_enumerate(
    instance: ProblemInstance,
    test_kind: str,
    n: int,
    lambdas: Sequence[float] = (),
    lam: float = 0.0,
) -> ExactResult:
    """Exact error, phase-2 entry and reject probabilities at test length ``n``.

    Sums multinomial type-class probabilities over every joint type of the
    training sequences, the first ``n`` test symbols and the continuation.
    """
    if test_kind not in TEST_KINDS:
        raise ValueError(f"unknown test kind {test_kind!r}")
    size = exact_size(instance, test_kind, n)
    if size > EXACT_GUARD:
        raise SizeGuardError(f"{size} joint types exceed the guard of {EXACT_GUARD}")
    kind = TEST_KINDS[test_kind]
    P = instance.matrix()
    M, d = P.shape
    gut = kind == kernels.KIND_GUTMAN
    total = n if gut else ceil_len(instance.k * n)
    lam_vec = np.full(M, float(lam)) if gut else np.asarray(lambdas, float)
    if lam_vec.shape != (M,):
        raise ValueError(f"need {M} thresholds")
    T1 = type_counts(d, n)
    C = type_counts(d, total - n)
    Tt = type_counts(d, total)
    lookup = {tuple(r): i for i, r in enumerate(Tt.astype(np.int64))}
    tot_idx = np.array(
        [[lookup[tuple(r)] for r in (t + C).astype(np.int64)] for t in T1], dtype=np.int64
    ).reshape(T1.shape[0], C.shape[0])

    if kind == kernels.KIND_TWO_PHASE_HT:
        with np.errstate(divide="ignore"):
            logP = np.log(P)
        S1 = np.ascontiguousarray(kernels.kl_scores(T1, n, logP).T[:, None, :])
        S2 = np.ascontiguousarray(kernels.kl_scores(Tt, total, logP).T[:, None, :])
        lp_train = np.zeros((M, 1))
    else:
        N = ceil_len(n * instance.alpha)
        A = type_counts(d, N)
        a2 = instance.alpha / instance.k if kind == kernels.KIND_THRESHOLD else instance.alpha
        s1 = _pair_scores(A, N, T1, n, instance.alpha)
        s2 = _pair_scores(A, N, Tt, total, a2)
        S1 = np.ascontiguousarray(np.broadcast_to(s1, (M,) + s1.shape))
        S2 = np.ascontiguousarray(np.broadcast_to(s2, (M,) + s2.shape))
        lp_train = np.stack([log_type_prob(A, N, P[i]) for i in range(M)])

    err, exc, rej, mass = (np.zeros(M) for _ in range(4))
    for j in range(M):
        r = kernels.exact_sum(
            kind, S1, S2, tot_idx, lp_train,
            log_type_prob(T1, n, P[j]), log_type_prob(C, total - n, P[j]),
            lam_vec, float(lam), j,
        )
        err[j], exc[j], rej[j], mass[j] = r
    return ExactResult(n, err, exc, rej, mass)


# ---------------------------------------------------------------------------
# decay-rate fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeFit:
    """Fitted decay rates ``-d log(p) / dn`` per hypothesis and the points left out."""

    rates: np.ndarray
    intercepts: np.ndarray
    excluded: tuple


def fit_decay(n_grid: Sequence[float], probs: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and intercept of ``-log p`` against ``n``."""
    n = np.asarray(n_grid, float)
    p = np.asarray(probs, float)
    if n.size < 2:
        raise ValueError("need at least two usable points to fit a slope")
    slope, icpt = np.polyfit(n, -np.log(p), 1)
    return float(slope), float(icpt)


def slope_fit(results: Sequence[SimResult], n_grid: Sequence[int] | None = None, which: str = "error") -> SlopeFit:
    """Decay rate of the error (or phase-2 entry) frequency for every hypothesis.

    Points with a zero count are excluded and listed per hypothesis.
    """
    if which not in ("error", "excess"):
        raise ValueError("which must be 'error' or 'excess'")
    ns = np.asarray(n_grid if n_grid is not None else [r.n for r in results], float)
    if len(ns) != len(results):
        raise ValueError("n_grid and results differ in length")
    counts = np.stack([r.error_counts if which == "error" else r.excess_counts for r in results])
    trials = np.stack([r.trials for r in results])
    M = counts.shape[1]
    rates, icpts, excluded = np.full(M, np.nan), np.full(M, np.nan), []
    for j in range(M):
        ok = (counts[:, j] > 0) & (trials[:, j] > 0)
        excluded.append(tuple(int(x) for x in ns[~ok]))
        if trials[:, j].sum() == 0:
            continue
        rates[j], icpts[j] = fit_decay(ns[ok], counts[ok, j] / trials[ok, j])
    return SlopeFit(rates, icpts, tuple(excluded))
