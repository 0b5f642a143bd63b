"""Problem instance shared by the exponent functions and the test runners."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..divergence import DistLike, Distribution, DivergenceError


@dataclass(frozen=True)
class ProblemInstance:
    """M distinct laws on one alphabet plus the test parameters.

    Parameters
    ----------
    distributions
        Generating laws ``P_1 .. P_M`` (M >= 2, pairwise distinct).
    alpha
        Training-to-test length ratio, ``N = ceil(alpha * n)``.
    k
        Second-phase length multiplier (``k >= 1``).
    gamma
        Target exponent of the excess-length probability.
    """

    distributions: tuple
    alpha: float = 1.0
    k: float = 1.0
    gamma: float = 0.0

    def __init__(
        self,
        distributions: Sequence[DistLike],
        alpha: float = 1.0,
        k: float = 1.0,
        gamma: float = 0.0,
    ) -> None:
        ds = tuple(d if isinstance(d, Distribution) else Distribution(d) for d in distributions)
        object.__setattr__(self, "distributions", ds)
        object.__setattr__(self, "alpha", float(alpha))
        object.__setattr__(self, "k", float(k))
        object.__setattr__(self, "gamma", float(gamma))
        self._check()

    def _check(self) -> None:
        ds = self.distributions
        if len(ds) < 2:
            raise DivergenceError("need at least two hypotheses")
        if len({len(d) for d in ds}) != 1:
            raise DivergenceError("all distributions must share one alphabet")
        for a in range(len(ds)):
            for b in range(a + 1, len(ds)):
                if ds[a] == ds[b]:
                    raise DivergenceError("distributions must be distinct")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DivergenceError(f"alpha must be positive, got {self.alpha}")
        if not self.k >= 1:
            raise DivergenceError(f"k must be >= 1, got {self.k}")
        if not self.gamma >= 0:
            raise DivergenceError(f"gamma must be non-negative, got {self.gamma}")

    @property
    def M(self) -> int:
        return len(self.distributions)

    @property
    def alphabet_size(self) -> int:
        return len(self.distributions[0])

    def probs(self, j: int) -> np.ndarray:
        return self.distributions[j].probs

    def matrix(self) -> np.ndarray:
        return np.stack([d.probs for d in self.distributions])

    def with_params(self, **changes) -> "ProblemInstance":
        return replace(self, **changes)

    def permuted(self, perm: Sequence[int]) -> "ProblemInstance":
        """Relabel hypotheses: new hypothesis ``t`` is old ``perm[t]``."""
        return ProblemInstance([self.distributions[p] for p in perm], self.alpha, self.k, self.gamma)

    def check_index(self, j: int) -> int:
        if not 0 <= int(j) < self.M:
            raise IndexError(f"hypothesis index {j} outside 0..{self.M - 1}")
        return int(j)
