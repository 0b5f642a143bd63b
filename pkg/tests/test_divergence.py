"""Divergences, distributions and empirical types."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

import oracles
from conftest import laws, random_pair
from exponent_lab import (
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
from exponent_lab.solver import GJSBound, min_weighted_kl


def variational_gjs(p, q, alpha):
    """min_V alpha D(p||V) + D(q||V) by BFGS in softmax coordinates."""
    p, q = np.asarray(p), np.asarray(q)

    def f(z):
        z = z - z.max()
        logv = z - np.log(np.exp(z).sum())
        return alpha * np.sum(p * (np.log(p) - logv)) + np.sum(q * (np.log(q) - logv))

    start = np.log(0.5 * (p + q))
    res = minimize(f, start, method="BFGS", options={"gtol": 1e-12})
    return float(res.fun)


def grid_gjs_binary(p, q, alpha, step=1e-5):
    v = np.arange(step, 1.0, step)
    V = np.stack([v, 1 - v], 1)
    vals = alpha * (p * np.log(p / V)).sum(1) + (q * np.log(q / V)).sum(1)
    return float(vals.min())


# ---------------------------------------------------------------------------
# Distribution / EmpiricalType
# ---------------------------------------------------------------------------


class TestDistribution:
    def test_accepts_rounded_simplex_vector(self):
        d = Distribution([0.3, 0.3, 0.4])
        assert len(d) == 3
        assert abs(d.probs.sum() - 1) <= 1e-12

    @pytest.mark.parametrize("bad", [[0.5, 0.6], [-0.1, 1.1], [1.0], [], [0.5, float("nan"), 0.5]])
    def test_rejects_invalid(self, bad):
        with pytest.raises(DivergenceError):
            Distribution(bad)

    def test_sum_tolerance_is_tight(self):
        with pytest.raises(DivergenceError):
            Distribution([0.5, 0.5 + 1e-9])

    def test_normalized_constructor(self):
        d = Distribution.normalized([1, 1, 2])
        np.testing.assert_allclose(d.probs, [0.25, 0.25, 0.5])

    def test_equality_and_hash(self):
        assert Distribution([0.2, 0.8]) == Distribution([0.2, 0.8])
        assert hash(Distribution([0.2, 0.8])) == hash(Distribution([0.2, 0.8]))
        assert Distribution([0.2, 0.8]) != Distribution([0.8, 0.2])

    def test_probs_read_only(self):
        d = Distribution([0.2, 0.8])
        with pytest.raises(ValueError):
            d.probs[0] = 0.5


class TestEmpiricalType:
    def test_counting(self):
        t = empirical_type([0, 0, 1, 0], 2)
        assert t.counts == (3, 1) and t.n == 4

    def test_constant_sequence_point_mass(self):
        t = empirical_type([2, 2, 2], 3)
        assert t.counts == (0, 0, 3)
        np.testing.assert_array_equal(t.to_distribution().probs, [0, 0, 1])

    @pytest.mark.parametrize("bad", [[], [0, 3], [-1, 0]])
    def test_errors(self, bad):
        with pytest.raises(DivergenceError):
            empirical_type(bad, 3)

    @given(st.lists(st.integers(0, 2), min_size=1, max_size=40), st.lists(st.integers(0, 2), min_size=1, max_size=40))
    def test_concatenation_adds_counts(self, x, y):
        tx, ty = empirical_type(x, 3), empirical_type(y, 3)
        txy = empirical_type(x + y, 3)
        assert txy == tx + ty

    @given(st.lists(st.integers(0, 3), min_size=1, max_size=60))
    def test_fractions_exact_on_simplex(self, x):
        t = empirical_type(x, 4)
        assert sum(t.fractions()) == 1
        assert all(isinstance(f, Fraction) for f in t.fractions())
        assert abs(t.to_distribution().probs.sum() - 1) <= 1e-12

    def test_from_counts(self):
        assert EmpiricalType.from_counts([2, 1]).n == 3


# ---------------------------------------------------------------------------
# kl
# ---------------------------------------------------------------------------


class TestKL:
    @given(laws())
    def test_self_zero(self, p):
        assert kl(p, p) == pytest.approx(0, abs=1e-15)

    def test_point_mass_vs_uniform(self):
        assert kl([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)

    def test_two_summation_orders(self):
        p, q = [0.25, 0.75], [0.2, 0.8]
        forward = 0.25 * math.log(0.25 / 0.2) + 0.75 * math.log(0.75 / 0.8)
        backward = math.fsum([0.75 * (math.log(0.75) - math.log(0.8)), 0.25 * (math.log(0.25) - math.log(0.2))])
        assert kl(p, q) == pytest.approx(forward, abs=1e-15)
        assert kl(p, q) == pytest.approx(backward, abs=1e-15)

    def test_infinite_on_support_mismatch(self):
        assert kl([0.5, 0.5], [1.0, 0.0]) == math.inf

    def test_dimension_mismatch(self):
        with pytest.raises(DivergenceError):
            kl([0.5, 0.5], [0.2, 0.3, 0.5])


# ---------------------------------------------------------------------------
# gjs
# ---------------------------------------------------------------------------


class TestGJS:
    @given(laws(), st.floats(0.01, 500))
    def test_self_zero(self, p, alpha):
        assert gjs(p, p, alpha) == pytest.approx(0, abs=1e-14)

    def test_variational_grid_oracle(self):
        p, q = np.array([0.9, 0.1]), np.array([0.2, 0.8])
        assert gjs(p, q, 1.0) == pytest.approx(grid_gjs_binary(p, q, 1.0), abs=1e-9)

    def test_large_alpha_tends_to_reverse_kl(self):
        p, q = [0.3, 0.7], [0.5, 0.5]
        assert abs(gjs(p, q, 1000.0) - kl(q, p)) <= 1e-2

    def test_fused_mixture_stable_at_large_alpha(self):
        p, q = np.array([0.9, 0.1]), np.array([0.2, 0.8])
        m = (300 * p + q) / 301
        naive = 300 * kl(p, m) + kl(q, m)
        assert gjs(p, q, 300.0) == pytest.approx(naive, rel=1e-9)

    @pytest.mark.parametrize("alpha", [0.0, -1.0])
    def test_alpha_positive(self, alpha):
        with pytest.raises(DivergenceError):
            gjs([0.5, 0.5], [0.2, 0.8], alpha)

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_positive_iff_distinct(self, d):
        rng = np.random.default_rng(d)
        for _ in range(200):
            p, q = random_pair(rng, d, 1e-3)
            assert gjs(p, q, rng.uniform(0.05, 20)) > 0

    def test_variational_identity_1000(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for t in range(1000):
            p, q = random_pair(rng, 2 + t % 3)
            alpha = float(np.exp(rng.uniform(np.log(0.1), np.log(50))))
            worst = max(worst, abs(gjs(p, q, alpha) - variational_gjs(p, q, alpha)))
        assert worst <= 1e-6

    @given(laws(d=3), laws(d=3))
    def test_monotone_in_alpha(self, p, q):
        alphas = np.geomspace(0.01, 100, 30)
        vals = [gjs(p, q, a) for a in alphas]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# renyi, binary_kl, chernoff
# ---------------------------------------------------------------------------


def renyi_grid_ternary(p1, p2, alpha, m=400):
    """min_Q alpha D(Q||p1) + D(Q||p2) by lattice scan plus local zooming."""
    return oracles.single_oracle(lambda Q: alpha * oracles.kl_rows(Q, p1) + oracles.kl_rows(Q, p2), lambda Q: np.ones(len(Q), bool), 3, m)


class TestRenyi:
    @given(laws(), st.floats(0.05, 0.95))
    def test_self_zero(self, p, s):
        assert renyi(p, p, s) == pytest.approx(0, abs=1e-13)

    def test_ternary_variational_oracle(self):
        p1, p2 = np.array([0.1, 0.3, 0.6]), np.array([0.45, 0.45, 0.1])
        assert renyi_alpha(p1, p2, 2.0) == pytest.approx(renyi_grid_ternary(p1, p2, 2.0), abs=1e-5)

    def test_half_order_symmetric(self):
        p, q = [0.1, 0.3, 0.6], [0.45, 0.45, 0.1]
        assert renyi_alpha(p, q, 1.0) == pytest.approx(renyi_alpha(q, p, 1.0), abs=1e-14)

    @pytest.mark.parametrize("order", [0.0, 1.0, 1.5])
    def test_order_range(self, order):
        with pytest.raises(DivergenceError):
            renyi([0.5, 0.5], [0.2, 0.8], order)

    def test_identity_with_solver(self):
        rng = np.random.default_rng(11)
        for t in range(10):
            p1, p2 = random_pair(rng, 2 + t % 2, 0.05)
            alpha = float(rng.uniform(0.3, 5))
            # Q_0 = Q_1 enforced by a zero GJS radius
            sol = min_weighted_kl([p1, p2], [alpha, 1.0], [GJSBound(0, 1, 1.0, 0.0)])
            assert sol.value == pytest.approx(renyi_alpha(p1, p2, alpha), abs=1e-4)


class TestBinaryKL:
    def test_zero(self):
        assert binary_kl(0.3, 0.3) == 0

    def test_monotone(self):
        assert binary_kl(0.2, 0.6) < binary_kl(0.2, 0.8)

    def test_value(self):
        expected = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
        assert binary_kl(0.5, 0.25) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.143841, abs=1e-6)

    @pytest.mark.parametrize("p,q", [(0, 0.5), (0.5, 1), (1.2, 0.3)])
    def test_domain(self, p, q):
        with pytest.raises(DivergenceError):
            binary_kl(p, q)


class TestChernoff:
    def test_symmetric(self):
        p, q = [0.9, 0.1], [0.2, 0.8]
        assert chernoff_information(p, q)[0] == pytest.approx(chernoff_information(q, p)[0], abs=1e-12)

    def test_matches_dense_scan(self):
        p, q = np.array([0.3, 0.3, 0.4]), np.array([0.1, 0.7, 0.2])
        s = np.linspace(0, 1, 200001)
        dense = float((-np.log((p[None] ** s[:, None] * q[None] ** (1 - s[:, None])).sum(1))).max())
        assert chernoff_information(p, q)[0] == pytest.approx(dense, abs=1e-9)
