"""Finite-alphabet distributions, empirical types and divergence primitives.

All divergences are in nats. ``kl`` returns ``math.inf`` on a support
mismatch instead of raising, so optimisers can treat such points as
automatically excluded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

SIMPLEX_TOL = 1e-12


class DivergenceError(ValueError):
    """Invalid input to a divergence primitive."""


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self) -> None:
        if int(self.size) != self.size or self.size < 2:
            raise DivergenceError(f"alphabet size must be an integer >= 2, got {self.size}")


class Distribution:
    """Immutable probability vector over a finite alphabet.

    Construction enforces non-negativity and ``|sum - 1| <= 1e-12``. Use
    :meth:`normalized` for decimal-rounded inputs such as ``[0.33, 0.33, 0.34]``
    that need exact renormalisation.
    """

    __slots__ = ("_p",)

    def __init__(self, probs: Sequence[float]) -> None:
        p = np.array(probs, dtype=float).reshape(-1)
        if p.size < 2:
            raise DivergenceError("a distribution needs an alphabet of size >= 2")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DivergenceError(f"probabilities must be finite and non-negative: {p}")
        if abs(math.fsum(p) - 1.0) > SIMPLEX_TOL:
            raise DivergenceError(f"probabilities sum to {math.fsum(p)!r}, not 1")
        p.setflags(write=False)
        self._p = p

    @classmethod
    def normalized(cls, weights: Sequence[float]) -> "Distribution":
        w = np.array(weights, dtype=float).reshape(-1)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DivergenceError(f"weights must be finite and non-negative: {w}")
        total = math.fsum(w)
        if total <= 0:
            raise DivergenceError("weights sum to zero")
        p = w / total
        # push the rounding residue into the largest entry
        p[np.argmax(p)] += 1.0 - math.fsum(p)
        return cls(p)

    @property
    def probs(self) -> np.ndarray:
        return self._p

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self._p.size)

    def __len__(self) -> int:
        return self._p.size

    def __array__(self, dtype=None, copy=None):
        return self._p if dtype is None else self._p.astype(dtype)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return self._p.shape == other._p.shape and bool(np.array_equal(self._p, other._p))

    def __hash__(self) -> int:
        return hash(self._p.tobytes())

    def __repr__(self) -> str:
        return f"Distribution({np.array2string(self._p, separator=', ')})"


DistLike = Union[Distribution, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class EmpiricalType:
    """Symbol counts of a sequence together with its length."""

    counts: tuple
    n: int

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise DivergenceError("type length must be positive")
        if any(c < 0 for c in self.counts) or sum(self.counts) != self.n:
            raise DivergenceError(f"counts {self.counts} do not sum to n={self.n}")

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "EmpiricalType":
        c = tuple(int(x) for x in counts)
        return cls(c, sum(c))

    @property
    def alphabet_size(self) -> int:
        return len(self.counts)

    def fractions(self) -> tuple:
        return tuple(Fraction(c, self.n) for c in self.counts)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n

    def to_distribution(self) -> Distribution:
        return Distribution.normalized(self.counts)

    def __add__(self, other: "EmpiricalType") -> "EmpiricalType":
        if self.alphabet_size != other.alphabet_size:
            raise DivergenceError("cannot add types over different alphabets")
        return EmpiricalType(tuple(a + b for a, b in zip(self.counts, other.counts)), self.n + other.n)


def as_probs(p: DistLike) -> np.ndarray:
    if isinstance(p, Distribution):
        return p.probs
    return np.asarray(p, dtype=float)


def _pair(p: DistLike, q: DistLike) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_probs(p), as_probs(q)
    if a.shape != b.shape:
        raise DivergenceError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def kl(p: DistLike, q: DistLike) -> float:
    """Relative entropy D(p||q) in nats; ``inf`` when p is not dominated by q."""
    a, b = _pair(p, q)
    pos = a > 0
    if np.any(b[pos] <= 0):
        return math.inf
    return float(np.sum(a[pos] * np.log(a[pos] / b[pos])))


def _kl_to_mixture(p: np.ndarray, other: np.ndarray, w: float) -> float:
    # D(p || w p + (1-w) other) with log(p/mix) = -log1p((1-w)(other/p - 1)),
    # exact where p > 0 and stable when w -> 1
    pos = p > 0
    ratio = other[pos] / p[pos]
    return float(-np.sum(p[pos] * np.log1p((1.0 - w) * (ratio - 1.0))))


def gjs(p: DistLike, q: DistLike, alpha: float) -> float:
    r"""Generalised Jensen-Shannon divergence.

    ``alpha * D(p || m) + D(q || m)`` with ``m = (alpha p + q) / (1 + alpha)``.
    Always finite since the mixture dominates both arguments.
    """
    if not alpha > 0:
        raise DivergenceError(f"alpha must be positive, got {alpha}")
    a, b = _pair(p, q)
    w = alpha / (1.0 + alpha)
    return alpha * _kl_to_mixture(a, b, w) + _kl_to_mixture(b, a, 1.0 - w)


def renyi(p: DistLike, q: DistLike, order: float) -> float:
    """Rényi divergence ``log(sum p^s q^(1-s)) / (s - 1)`` for ``s`` in (0, 1).

    With ``s = alpha / (1 + alpha)`` this is ``-(1+alpha) log sum p^s q^(1-s)``,
    the maximum of the excess-length exponent of the binary two-phase test.
    """
    if not 0.0 < order < 1.0:
        raise DivergenceError(f"order must lie in (0, 1), got {order}")
    a, b = _pair(p, q)
    z = float(np.sum(a**order * b ** (1.0 - order)))
    if z <= 0:
        return math.inf
    return math.log(z) / (order - 1.0)


def renyi_alpha(p: DistLike, q: DistLike, alpha: float) -> float:
    """``renyi(p, q, alpha / (1 + alpha))``."""
    return renyi(p, q, alpha / (1.0 + alpha))


def binary_kl(p: float, q: float) -> float:
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise DivergenceError(f"binary_kl arguments must lie in (0, 1), got {p}, {q}")
    return p * math.log(p / q) + (1.0 - p) * math.log((1.0 - p) / (1.0 - q))


def chernoff_information(p: DistLike, q: DistLike) -> tuple[float, float]:
    """``max_s -log sum p^s q^(1-s)`` over s in [0, 1]; returns (value, s*)."""
    a, b = _pair(p, q)

    def neg(s: float) -> float:
        return math.log(float(np.sum(a**s * b ** (1.0 - s))))

    res = minimize_scalar(neg, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    return -float(res.fun), float(res.x)


def empirical_type(sequence: Sequence[int], alphabet_size: int | None = None) -> EmpiricalType:
    seq = np.asarray(sequence)
    if seq.size == 0:
        raise DivergenceError("empty sequence has no type")
    if seq.ndim != 1 or not np.issubdtype(seq.dtype, np.integer):
        raise DivergenceError("sequence must be a 1-D array of integer symbols")
    size = int(seq.max()) + 1 if alphabet_size is None else int(alphabet_size)
    if seq.min() < 0 or seq.max() >= size:
        raise DivergenceError(f"symbols outside alphabet [0, {size})")
    counts = np.bincount(seq, minlength=max(size, 2))
    return EmpiricalType(tuple(int(c) for c in counts), int(seq.size))
