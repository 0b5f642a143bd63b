"""Decision procedures: Gutman's fixed-length test, the sequential test, the
nearest-neighbour two-phase test, the threshold-based binary two-phase test and
the two-phase test with known laws.

Scores and decision rules come from :mod:`exponent_lab.kernels`, the same
code the Monte Carlo engine runs in batch, so a single call here and a
simulated trial on the same data always agree. Hypotheses are 0-based.
Ties in every argmin go to the lowest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from . import kernels
from .divergence import DistLike, DivergenceError, EmpiricalType, as_probs, empirical_type
from .kernels import ceil_len

SeqLike = Union[Sequence[int], np.ndarray]


class LengthError(DivergenceError):
    """A sequence is shorter than the procedure requires, or lengths disagree."""


@dataclass(frozen=True)
class TestDecision:
    """``H_{label}`` for ``label`` in ``0..M-1``, or the reject option when ``label`` is ``None``."""

    __test__ = False  # keep pytest from collecting this class

    label: int | None

    @classmethod
    def reject(cls) -> "TestDecision":
        return cls(None)

    @property
    def is_reject(self) -> bool:
        return self.label is None

    def __str__(self) -> str:
        return "Reject" if self.label is None else f"H{self.label + 1}"


@dataclass(frozen=True)
class TwoPhaseConfig:
    """Parameters of a two-phase test; lengths are rounded up once, here."""

    __test__ = False

    n: int
    k: float
    alpha: float
    lambdas: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.k >= 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if any(x < 0 for x in self.lambdas):
            raise ValueError("thresholds must be non-negative")

    @property
    def M(self) -> int:
        return len(self.lambdas)

    @property
    def N(self) -> int:
        """Training length ``ceil(n alpha)``."""
        return ceil_len(self.n * self.alpha)

    @property
    def second_len(self) -> int:
        """Total test length ``ceil(k n)`` when phase 2 runs."""
        return ceil_len(self.k * self.n)


@dataclass(frozen=True)
class SequentialConfig:
    __test__ = False

    beta: float
    alpha: float
    max_steps: int = 10**6

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class TestOutcome:
    """Decision, samples consumed and the scores the decision was based on.

    ``phase`` is 1 or 2 for two-phase tests and ``None`` otherwise.
    ``flags`` records notable events (``"full-psi"`` when the sequential test
    stopped with every score above threshold, ``"truncated"`` at the step cap).
    """

    __test__ = False

    decision: TestDecision
    tau: int
    phase: int | None = None
    scores: tuple = ()
    flags: tuple = field(default_factory=tuple)

    @property
    def truncated(self) -> bool:
        return "truncated" in self.flags


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _as_symbols(seq: SeqLike, name: str) -> np.ndarray:
    a = np.asarray(seq)
    if a.ndim != 1 or not np.issubdtype(a.dtype, np.integer):
        raise DivergenceError(f"{name} must be a 1-D integer sequence")
    return a


def _counts(seq_or_type, d: int, name: str) -> tuple[np.ndarray, int]:
    if isinstance(seq_or_type, EmpiricalType):
        if seq_or_type.alphabet_size != d:
            raise DivergenceError(f"{name} has alphabet size {seq_or_type.alphabet_size}, expected {d}")
        return np.asarray(seq_or_type.counts, float), seq_or_type.n
    a = _as_symbols(seq_or_type, name)
    t = empirical_type(a, d)
    return np.asarray(t.counts, float), t.n


def _alphabet(training, test, d: int | None) -> int:
    if d is not None:
        return int(d)
    for x in list(training) + [test]:
        if isinstance(x, EmpiricalType):
            return x.alphabet_size
    m = max(int(np.max(_as_symbols(x, "sequence"))) for x in list(training) + [test])
    return max(m + 1, 2)


def _train_matrix(training, d: int) -> tuple[np.ndarray, int]:
    rows, lens = [], set()
    for i, x in enumerate(training):
        c, n = _counts(x, d, f"training sequence {i}")
        rows.append(c)
        lens.add(n)
    if len(lens) != 1:
        raise LengthError(f"training sequences have different lengths {sorted(lens)}")
    return np.stack(rows)[None, :, :], lens.pop()


def gjs_score_vector(train: np.ndarray, N: int, test_counts: np.ndarray, n: int, alpha: float) -> np.ndarray:
    """``GJS(T_{X_i}, T_Y, alpha)`` for every source, as a length-M vector."""
    return kernels.gjs_scores(np.asarray(train, float).reshape(1, *np.shape(train)[-2:]), N,
                              np.asarray(test_counts, float)[None, :], n, alpha)[0]


# ---------------------------------------------------------------------------
# fixed-length test
# ---------------------------------------------------------------------------


def gutman_test(
    training: Sequence[Union[EmpiricalType, SeqLike]],
    test: Union[EmpiricalType, SeqLike],
    lam: float,
    alpha: float,
    alphabet_size: int | None = None,
) -> TestDecision:
    """Three-branch rule: ``H_1`` if every other score is at least ``lam``;
    ``H_i`` if exactly one score is below ``lam``; reject otherwise."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    d = _alphabet(training, test, alphabet_size)
    X, N = _train_matrix(training, d)
    y, n = _counts(test, d, "test sequence")
    if abs(N - n * alpha) >= 1.0:
        raise LengthError(f"training length {N} does not match ceil(n alpha) = {ceil_len(n * alpha)}")
    s = kernels.gjs_scores(X, N, y[None, :], n, alpha)
    lambdas = np.full(X.shape[1], float(lam))
    dec, _ = kernels.decide_batch(kernels.KIND_GUTMAN, s, s, lambdas, 0.0)
    return TestDecision(None if dec[0] == kernels.REJECT else int(dec[0]))


# ---------------------------------------------------------------------------
# sequential test
# ---------------------------------------------------------------------------


def g_threshold(beta: float, n: int, alpha: float, alphabet_size: int) -> float:
    """Universality threshold of the sequential test at test length ``n``."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if n < 1 or alphabet_size < 2 or not alpha > 0:
        raise ValueError("need n >= 1, alphabet_size >= 2 and alpha > 0")
    d = alphabet_size
    return (
        -math.log(beta * (d - 1)) / n
        + 2 * d * math.log(n + 1) / n
        + d * math.log(n * alpha + 1) / n
    )


class SequentialState:
    """Resumable state of one sequential test run.

    Advance with :meth:`step`, which consumes one test symbol and the
    training symbols that bring every source to ``N_k = ceil(alpha k)``.
    A state may be handed to another thread but must not be advanced from two
    places at once.
    """

    def __init__(self, M: int, alphabet_size: int, config: SequentialConfig) -> None:
        if M < 2:
            raise ValueError("need at least two hypotheses")
        self.M = M
        self.d = alphabet_size
        self.config = config
        self.train = np.zeros((M, alphabet_size))
        self.test = np.zeros(alphabet_size)
        self.k = 0
        self.N = 0
        self.outcome: TestOutcome | None = None

    @property
    def done(self) -> bool:
        return self.outcome is not None

    def training_needed(self) -> int:
        """Training symbols per source required by the next step."""
        return ceil_len(self.config.alpha * (self.k + 1)) - self.N

    def step(self, train_symbols: Sequence[Sequence[int]], test_symbol: int) -> TestOutcome | None:
        if self.done:
            raise RuntimeError("sequential run already stopped")
        need = self.training_needed()
        if len(train_symbols) != self.M or any(len(t) != need for t in train_symbols):
            raise LengthError(f"step {self.k + 1} needs {need} training symbols from each of {self.M} sources")
        for i, syms in enumerate(train_symbols):
            for a in syms:
                self.train[i, self._sym(a)] += 1
        self.test[self._sym(test_symbol)] += 1
        self.k += 1
        self.N += need
        scores = gjs_score_vector(self.train, self.N, self.test, self.k, self.config.alpha)
        g = g_threshold(self.config.beta, self.k, self.config.alpha, self.d)
        psi = scores > g
        size = int(psi.sum())
        if size >= self.M - 1:
            if size == self.M - 1:
                j, flags = int(np.flatnonzero(~psi)[0]), ()
            else:
                j, flags = int(np.argmin(scores)), ("full-psi",)
            self.outcome = TestOutcome(TestDecision(j), self.k, None, tuple(map(float, scores)), flags)
        elif self.k >= self.config.max_steps:
            j = int(np.argmin(scores))
            self.outcome = TestOutcome(TestDecision(j), self.k, None, tuple(map(float, scores)), ("truncated",))
        return self.outcome

    def _sym(self, a) -> int:
        a = int(a)
        if not 0 <= a < self.d:
            raise DivergenceError(f"symbol {a} outside alphabet of size {self.d}")
        return a


def sequential_test(
    training_stream: Sequence[Iterable[int]],
    test_stream: Iterable[int],
    config: SequentialConfig,
    alphabet_size: int,
) -> TestOutcome:
    """Run the sequential test until ``|Psi_k| >= M - 1``.

    ``Psi_k`` collects the sources whose score exceeds ``g(beta, k)``. The
    decision is the single source outside ``Psi``; if every score exceeds
    the threshold the lowest-scoring source is chosen and the outcome is
    flagged ``"full-psi"``. Hitting ``max_steps`` yields a ``"truncated"``
    outcome holding the current nearest neighbour.
    """
    trains: list[Iterator[int]] = [iter(t) for t in training_stream]
    test_it = iter(test_stream)
    state = SequentialState(len(trains), alphabet_size, config)
    while not state.done:
        need = state.training_needed()
        try:
            tr = [[next(it) for _ in range(need)] for it in trains]
            y = next(test_it)
        except StopIteration:
            raise LengthError(f"streams ran out at step {state.k + 1}") from None
        state.step(tr, y)
    return state.outcome


# ---------------------------------------------------------------------------
# two-phase tests
# ---------------------------------------------------------------------------


def _split_test(test_full: SeqLike, n: int, total: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    y = _as_symbols(test_full, "test sequence")
    if y.size < total:
        raise LengthError(f"test sequence has {y.size} symbols, needs {total}")
    if y.size and (y.min() < 0 or y.max() >= d):
        raise DivergenceError(f"test symbols outside alphabet of size {d}")
    y1 = np.bincount(y[:n], minlength=d).astype(float)
    y2 = np.bincount(y[n:total], minlength=d).astype(float)
    return y1, y2


def _two_phase(kind, X, N, y1, y2, n, total, alpha1, alpha2, lambdas, lam) -> TestOutcome:
    s1 = kernels.gjs_scores(X, N, y1[None, :], n, alpha1)
    s2 = kernels.gjs_scores(X, N, (y1 + y2)[None, :], total, alpha2)
    dec, ph2 = kernels.decide_batch(kind, s1, s2, np.asarray(lambdas, float), lam)
    if ph2[0]:
        return TestOutcome(TestDecision(int(dec[0])), total, 2, tuple(map(float, s2[0])))
    return TestOutcome(TestDecision(int(dec[0])), n, 1, tuple(map(float, s1[0])))


def two_phase_test(
    training: Sequence[Union[EmpiricalType, SeqLike]],
    test_full: SeqLike,
    config: TwoPhaseConfig,
    alphabet_size: int | None = None,
) -> TestOutcome:
    """Nearest-neighbour two-phase test.

    Stops at ``n`` with the nearest neighbour ``i*`` when every other score is
    at least its threshold; otherwise uses all ``ceil(k n)`` test symbols and
    returns the nearest neighbour of the pooled type. Never rejects.
    """
    if len(training) != config.M:
        raise ValueError(f"{len(training)} training sequences for {config.M} thresholds")
    d = _alphabet(training, _as_symbols(test_full, "test sequence"), alphabet_size)
    X, N = _train_matrix(training, d)
    if N < config.N:
        raise LengthError(f"training sequences have {N} symbols, need {config.N}")
    y1, y2 = _split_test(test_full, config.n, config.second_len, d)
    a = config.alpha
    return _two_phase(kernels.KIND_TWO_PHASE, X, N, y1, y2, config.n, config.second_len, a, a, config.lambdas, 0.0)


def threshold_two_phase_binary(
    training: Sequence[Union[EmpiricalType, SeqLike]],
    test_full: SeqLike,
    n: int,
    k: float,
    alpha: float,
    lambda1: float,
    lambda2: float,
    lam: float,
    alphabet_size: int | None = None,
) -> TestOutcome:
    """Threshold-based binary two-phase test.

    Stops at ``n`` if some score exceeds its threshold and then decides
    ``H_1`` iff the first score is at most ``lambda1``. Otherwise it scores the
    pooled test type against the first training type with ratio ``alpha / k``
    and decides ``H_1`` iff that score is at most ``lam``.
    """
    if len(training) != 2:
        raise ValueError("the threshold-based test is binary")
    cfg = TwoPhaseConfig(n, k, alpha, (lambda1, lambda2))
    d = _alphabet(training, _as_symbols(test_full, "test sequence"), alphabet_size)
    X, N = _train_matrix(training, d)
    if N < cfg.N:
        raise LengthError(f"training sequences have {N} symbols, need {cfg.N}")
    y1, y2 = _split_test(test_full, n, cfg.second_len, d)
    return _two_phase(kernels.KIND_THRESHOLD, X, N, y1, y2, n, cfg.second_len, alpha, alpha / k, cfg.lambdas, lam)


def two_phase_ht(
    P: Sequence[DistLike],
    test_full: SeqLike,
    n: int,
    k: float,
    lambdas: Sequence[float],
) -> TestOutcome:
    """Two-phase test with known laws: KL scores ``D(T_Y || P_i)``.

    Stops at ``n`` iff every non-minimal score strictly exceeds its threshold.
    """
    logP = np.log(np.stack([np.asarray(as_probs(p), float) for p in P]))
    M, d = logP.shape
    if len(lambdas) != M:
        raise ValueError(f"{len(lambdas)} thresholds for {M} laws")
    total = ceil_len(k * n)
    if k < 1 or n < 1:
        raise ValueError("need n >= 1 and k >= 1")
    y1, y2 = _split_test(test_full, n, total, d)
    s1 = kernels.kl_scores(y1[None, :], n, logP)
    s2 = kernels.kl_scores((y1 + y2)[None, :], total, logP)
    dec, ph2 = kernels.decide_batch(kernels.KIND_TWO_PHASE_HT, s1, s2, np.asarray(lambdas, float), 0.0)
    if ph2[0]:
        return TestOutcome(TestDecision(int(dec[0])), total, 2, tuple(map(float, s2[0])))
    return TestOutcome(TestDecision(int(dec[0])), n, 1, tuple(map(float, s1[0])))
