"""Baselines, achievable two-phase exponents and the threshold search."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import FIG1, TABLE1
from exponent_lab import ExponentReport, ProblemInstance, gjs, l_exponent
from exponent_lab.solver import (
    LambdaNotAdmissible,
    baseline_exponents,
    bayes_optimize,
    f_exponent,
    gamma_bar,
    gamma_exponent,
    omega_exponent,
    threshold_bayes_optimize,
    threshold_test_exponents,
    tradeoff_frontier,
    two_phase_exponents,
)


class TestBaselines:
    def test_binary_sequential_exponents(self, binary_instance):
        P = binary_instance.matrix()
        seq = baseline_exponents(binary_instance)["sequential"].per_hypothesis
        assert seq[0] == pytest.approx(gjs(P[1], P[0], 1.0), abs=1e-15)
        assert seq[1] == pytest.approx(gjs(P[0], P[1], 1.0), abs=1e-15)

    def test_fixed_length_is_min_over_ordered_pairs(self, table1_instance):
        P = table1_instance.matrix()
        lam_bar = min(gjs(P[i], P[j], 1.0) for i in range(3) for j in range(3) if i != j)
        fixed = baseline_exponents(table1_instance)["fixed-length"]
        assert fixed.per_hypothesis == pytest.approx((lam_bar,) * 3, abs=1e-15)
        assert fixed.regime_note == "fixed-length"

    def test_hypothesis_fixed_length_is_omega(self, table1_instance):
        fixed = baseline_exponents(table1_instance, "hypothesis")["fixed-length"].per_hypothesis
        for j in range(3):
            assert fixed[j] == pytest.approx(omega_exponent(table1_instance, j), abs=1e-5)

    def test_report_min_structure_enforced(self):
        with pytest.raises(ValueError):
            ExponentReport((0.1, 0.2), 0.3, (0.0, 0.0), "bridged")


class TestTwoPhaseExponents:
    def test_formula_and_min_structure(self, binary_instance):
        lam = (0.02, 0.03)
        rep = two_phase_exponents(binary_instance, lam)
        L = [l_exponent(binary_instance, j) for j in range(2)]
        for j in range(2):
            assert rep.per_hypothesis[j] == pytest.approx(min(lam[j], L[j] + binary_instance.gamma), abs=1e-12)
        assert rep.bayesian == min(rep.per_hypothesis)

    def test_zero_thresholds_are_fixed_length(self, binary_instance):
        rep = two_phase_exponents(binary_instance, (0.0, 0.0))
        assert rep.regime_note == "fixed-length"
        assert rep.per_hypothesis == baseline_exponents(binary_instance)["fixed-length"].per_hypothesis

    def test_inadmissible_names_hypothesis(self, binary_instance):
        # lambda_0 above GJS(P_1, P_0) zeroes F_0
        inst = binary_instance.with_params(gamma=0.01)
        lam = (0.5, 0.001)
        G = [f_exponent(inst, lam, j) for j in range(2)]
        bad = [j for j in range(2) if G[j] < 0.01]
        assert bad == [0]
        with pytest.raises(LambdaNotAdmissible) as err:
            two_phase_exponents(inst, lam)
        assert err.value.j == bad[0]

    def test_negative_thresholds(self, binary_instance):
        with pytest.raises(ValueError):
            two_phase_exponents(binary_instance, (-0.1, 0.1))

    def test_hypothesis_infeasible_thresholds_fall_back(self, table1_instance):
        rep = two_phase_exponents(table1_instance, (0.05, 0.05, 0.05), "hypothesis")
        assert rep.regime_note == "fixed-length"
        assert gamma_exponent(table1_instance, (0.05,) * 3, 0) == np.inf


class TestBayesOptimize:
    def test_gamma_above_gamma_bar_is_fixed_length(self):
        inst = ProblemInstance(FIG1, alpha=300.0, k=20.0)
        gb = min(gamma_bar(inst, j) for j in range(2))
        rep = bayes_optimize(inst.with_params(gamma=gb + 0.01))
        assert rep.regime_note == "fixed-length"
        assert rep.lambda_used == (0.0, 0.0)

    def test_small_gamma_large_k_reaches_sequential(self):
        inst = ProblemInstance(FIG1, alpha=300.0, k=20.0, gamma=1e-8)
        rep = bayes_optimize(inst)
        seq = baseline_exponents(inst)["sequential"].per_hypothesis
        assert rep.bayesian >= 0.99 * min(seq)

    def test_no_sampled_admitted_threshold_does_better(self, table1_instance):
        inst = table1_instance.with_params(k=2.2, gamma=0.001)
        rep = bayes_optimize(inst, "hypothesis")
        rng = np.random.default_rng(0)
        checked = 0
        for _ in range(60):
            lam = rng.uniform(0.05, 0.3, 3)
            try:
                other = two_phase_exponents(inst, lam, "hypothesis")
            except LambdaNotAdmissible:
                continue
            checked += 1
            assert other.bayesian <= rep.bayesian + 1e-5
        assert checked > 5

    @pytest.mark.parametrize("perm", [(1, 2, 0), (2, 1, 0)])
    def test_permutation_invariant_hypothesis(self, perm):
        base = ProblemInstance(TABLE1, k=1.8, gamma=0.005)
        moved = ProblemInstance([TABLE1[p] for p in perm], k=1.8, gamma=0.005)
        a, b = bayes_optimize(base, "hypothesis"), bayes_optimize(moved, "hypothesis")
        assert a.bayesian == pytest.approx(b.bayesian, abs=1e-9)
        np.testing.assert_allclose(np.asarray(a.per_hypothesis)[list(perm)], b.per_hypothesis, atol=1e-9)

    def test_permutation_invariant_classification(self):
        P = ([0.7, 0.2, 0.1], [0.2, 0.3, 0.5])
        a = bayes_optimize(ProblemInstance(P, alpha=2.0, k=3.0, gamma=0.01))
        b = bayes_optimize(ProblemInstance(P[::-1], alpha=2.0, k=3.0, gamma=0.01))
        assert a.bayesian == pytest.approx(b.bayesian, abs=1e-9)
        np.testing.assert_allclose(a.per_hypothesis[::-1], b.per_hypothesis, atol=1e-9)

    def test_min_structure(self, table1_instance):
        rep = bayes_optimize(table1_instance.with_params(k=10.0, gamma=1e-8), "hypothesis")
        assert rep.bayesian == min(rep.per_hypothesis)


class TestFrontier:
    def test_larger_gamma_shrinks_frontier(self):
        inst = ProblemInstance(FIG1, alpha=300.0, k=20.0)
        fronts = [tradeoff_frontier(inst.with_params(gamma=g), n_points=5) for g in (1e-3, 0.05, 0.2)]
        for a, b in zip(fronts, fronts[1:]):
            for pa, pb in zip(a, b):
                assert pb.exponents[0] <= pa.exponents[0] + 1e-6
                assert pb.exponents[1] <= pa.exponents[1] + 1e-6

    def test_fixed_point_above_gamma_bar(self):
        inst = ProblemInstance(FIG1, alpha=300.0, k=20.0)
        gb = min(gamma_bar(inst, j) for j in range(2))
        front = tradeoff_frontier(inst.with_params(gamma=gb * 1.1), n_points=5)
        fixed = baseline_exponents(inst)["fixed-length"].per_hypothesis
        assert len(front) == 1 and front[0].exponents == pytest.approx(fixed)

    def test_needs_two_hypotheses(self, table1_instance):
        with pytest.raises(ValueError):
            tradeoff_frontier(table1_instance)


class TestThresholdTest:
    INST = ProblemInstance(([0.25, 0.75], [0.2, 0.8]), alpha=1.0, k=3.0, gamma=0.0)

    def test_report_formula(self):
        rep = threshold_test_exponents(self.INST, (0.002, 0.0015), 0.003)
        assert rep.per_hypothesis[0] == pytest.approx(min(0.002, 3 * 0.003))
        assert rep.bayesian == min(rep.per_hypothesis)

    def test_inadmissible(self):
        with pytest.raises(LambdaNotAdmissible):
            threshold_test_exponents(self.INST.with_params(gamma=1.0), (0.002, 0.0015), 0.003)

    def test_optimum_balances_phase_two(self):
        rep = threshold_bayes_optimize(self.INST.with_params(gamma=1e-4))
        assert rep.bayesian == min(rep.per_hypothesis)
        assert rep.lam > 0
