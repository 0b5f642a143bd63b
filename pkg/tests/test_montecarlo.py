"""Seeded simulation, exact enumeration, Wilson intervals and decay fits."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIG3, FIG3_LAMBDAS
from exponent_lab import ProblemInstance
from exponent_lab.kernels import ceil_len
from exponent_lab.montecarlo import (
    EXACT_GUARD,
    SimPlan,
    SimResult,
    SizeGuardError,
    exact_enumerate,
    exact_size,
    fit_decay,
    run_sequential,
    run_sim,
    slope_fit,
    wilson_interval,
    wilson_upper_one_sided,
)
from exponent_lab.procedures import (
    TwoPhaseConfig,
    gutman_test,
    threshold_two_phase_binary,
    two_phase_ht,
    two_phase_test,
)


def brute_force(inst, kind, n, lambdas=(), lam=0.0):
    """Error, phase-2 and reject probabilities by summing over raw sequences."""
    P = inst.matrix()
    M, d = P.shape
    N = ceil_len(n * inst.alpha)
    total = n if kind == "gutman" else ceil_len(inst.k * n)
    n_train = 0 if kind == "two-phase-ht" else M * N
    out = np.zeros((3, M))
    for j in range(M):
        for word in itertools.product(range(d), repeat=n_train + total):
            trains = [list(word[i * N : (i + 1) * N]) for i in range(M)] if n_train else []
            y = list(word[n_train:])
            pr = math.prod(P[i, a] for i in range(M) for a in (trains[i] if trains else ()))
            pr *= math.prod(P[j, a] for a in y)
            if pr == 0:
                continue
            if kind == "gutman":
                dec, phase = gutman_test(trains, y, lam, inst.alpha, d).label, 1
            else:
                if kind == "two-phase":
                    o = two_phase_test(trains, y, TwoPhaseConfig(n, inst.k, inst.alpha, lambdas), d)
                elif kind == "threshold":
                    o = threshold_two_phase_binary(trains, y, n, inst.k, inst.alpha, *lambdas, lam, d)
                else:
                    o = two_phase_ht(P, y, n, inst.k, lambdas)
                dec, phase = o.decision.label, o.phase
            out[0, j] += pr * (dec is not None and dec != j)
            out[1, j] += pr * (phase == 2)
            out[2, j] += pr * (dec is None)
    return out


BINARY = ProblemInstance(([0.7, 0.3], [0.4, 0.6]), alpha=1.0, k=2.0)


class TestExactEnumerate:
    @pytest.mark.parametrize(
        "kind,kw",
        [
            ("two-phase", dict(lambdas=(0.03, 0.02))),
            ("gutman", dict(lam=0.05)),
            ("threshold", dict(lambdas=(0.02, 0.03), lam=0.01)),
            ("two-phase-ht", dict(lambdas=(0.03, 0.02))),
        ],
    )
    def test_matches_sequence_sum_n2(self, kind, kw):
        ex = exact_enumerate(BINARY, kind, 2, **kw)
        bf = brute_force(BINARY, kind, 2, **kw)
        np.testing.assert_allclose(ex.per_hypothesis_error, bf[0], atol=1e-14)
        np.testing.assert_allclose(ex.excess_prob, bf[1], atol=1e-14)
        np.testing.assert_allclose(ex.reject_prob, bf[2], atol=1e-14)

    def test_ternary_fractional_lengths(self):
        inst = ProblemInstance(([0.5, 0.3, 0.2], [0.2, 0.2, 0.6]), alpha=1.5, k=1.5)
        ex = exact_enumerate(inst, "two-phase", 2, lambdas=(0.05, 0.1))
        bf = brute_force(inst, "two-phase", 2, lambdas=(0.05, 0.1))
        np.testing.assert_allclose(ex.per_hypothesis_error, bf[0], atol=1e-13)
        np.testing.assert_allclose(ex.excess_prob, bf[1], atol=1e-13)

    @pytest.mark.parametrize("kind", ["two-phase", "gutman", "threshold", "two-phase-ht"])
    def test_mass_is_one(self, kind):
        kw = {"lam": 0.05} if kind == "gutman" else {"lambdas": (0.03, 0.02), "lam": 0.01}
        ex = exact_enumerate(BINARY, kind, 5, **kw)
        np.testing.assert_allclose(ex.mass, 1.0, atol=1e-12)

    def test_point_masses_never_err(self):
        inst = ProblemInstance(([1.0, 0.0], [0.0, 1.0]), alpha=1.0, k=2.0)
        ex = exact_enumerate(inst, "two-phase", 4, lambdas=(1e-3, 1e-3))
        assert np.all(ex.per_hypothesis_error == 0)

    def test_only_gutman_rejects(self):
        for kind in ("two-phase", "threshold", "two-phase-ht"):
            assert np.all(exact_enumerate(BINARY, kind, 4, lambdas=(0.03, 0.02), lam=0.01).reject_prob == 0)
        assert np.all(exact_enumerate(BINARY, "gutman", 4, lam=0.05).reject_prob > 0)

    def test_size_guard(self):
        inst = ProblemInstance(([0.5, 0.3, 0.2], [0.2, 0.2, 0.6], [0.1, 0.8, 0.1]), alpha=3.0, k=3.0)
        assert exact_size(inst, "two-phase", 20) > EXACT_GUARD
        with pytest.raises(SizeGuardError):
            exact_enumerate(inst, "two-phase", 20, lambdas=(0.1, 0.1, 0.1))

    def test_size_count(self):
        # (N+1)^M training types, n+1 phase-1 types, ceil(kn)-n+1 continuations
        assert exact_size(BINARY, "two-phase", 4) == 5 * 5 * 5 * 5
        assert exact_size(BINARY, "two-phase-ht", 4) == 5 * 5


class TestRunSim:
    PLAN = dict(trials=5000, seed=42, n_grid=(4, 8, 16), lambdas=(0.03, 0.02))

    def test_thread_count_does_not_change_tallies(self):
        one = run_sim(SimPlan(BINARY, "two-phase", threads=1, **self.PLAN))
        many = run_sim(SimPlan(BINARY, "two-phase", threads=4, **self.PLAN))
        for a, b in zip(one, many):
            for f in ("trials", "error_counts", "excess_counts", "reject_counts", "tau_sum"):
                np.testing.assert_array_equal(getattr(a, f), getattr(b, f))

    def test_seed_changes_tallies(self):
        a = run_sim(SimPlan(BINARY, "two-phase", **self.PLAN))
        b = run_sim(SimPlan(BINARY, "two-phase", **{**self.PLAN, "seed": 43}))
        assert any(not np.array_equal(x.tau_sum, y.tau_sum) for x, y in zip(a, b))

    def test_mean_tau_bounds(self):
        inst = BINARY.with_params(k=2.5)
        for r in run_sim(SimPlan(inst, "two-phase", **self.PLAN)):
            assert np.all(r.mean_tau >= r.n) and np.all(r.mean_tau <= ceil_len(2.5 * r.n))
            np.testing.assert_array_equal(r.tau_sum, r.trials * r.n + r.excess_counts * (ceil_len(2.5 * r.n) - r.n))

    def test_mean_tau_ratio_tends_to_one(self):
        inst = ProblemInstance(([0.8, 0.2], [0.3, 0.7]), alpha=1.0, k=3.0)
        res = run_sim(SimPlan(inst, "two-phase", 4000, 3, (10, 40, 160), lambdas=(0.02, 0.02)))
        ratios = np.array([r.mean_tau / r.n for r in res])
        assert np.all(np.diff(ratios, axis=0) <= 0)
        assert np.all(ratios[0] > 1.0) and np.all(ratios[-1] < 1.01)

    def test_trial_count_and_point_masses(self):
        inst = ProblemInstance(([1.0, 0.0], [0.0, 1.0]), alpha=1.0, k=2.0)
        r = run_sim(SimPlan(inst, "two-phase", 1, 5, (3,), lambdas=(1e-3, 1e-3)))[0]
        assert r.trials.tolist() == [1, 1] and r.error_counts.tolist() == [0, 0]

    def test_hypothesis_subset(self):
        r = run_sim(SimPlan(BINARY, "two-phase", hypotheses=(1,), **self.PLAN))[0]
        assert r.trials.tolist() == [0, 5000] and np.isnan(r.per_hypothesis_error[0])

    def test_partial_blocks_counted(self):
        r = run_sim(SimPlan(BINARY, "gutman", 2500, 1, (6,), lam=0.05))[0]
        assert r.trials.tolist() == [2500, 2500]
        assert np.all(r.excess_counts == 0)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(test_kind="nope"),
            dict(trials=0),
            dict(n_grid=()),
            dict(n_grid=(8, 4)),
            dict(n_grid=(0, 4)),
            dict(lambdas=(0.1,)),
            dict(test_kind="gutman", lam=0.0),
        ],
    )
    def test_plan_validation(self, kw):
        base = dict(instance=BINARY, test_kind="two-phase", trials=10, seed=1, n_grid=(4,), lambdas=(0.1, 0.1))
        with pytest.raises(ValueError):
            SimPlan(**{**base, **kw})

    def test_threshold_plan_binary_only(self):
        inst = ProblemInstance(FIG3, alpha=8.0, k=3.0)
        with pytest.raises(ValueError):
            SimPlan(inst, "threshold", 10, 1, (4,), lambdas=FIG3_LAMBDAS)

    def test_exact_within_wilson(self):
        inst = ProblemInstance(([0.6, 0.4], [0.35, 0.65], [0.15, 0.85]), alpha=1.0, k=2.0)
        lam = (0.02, 0.01, 0.03)
        ex = exact_enumerate(inst, "two-phase", 6, lambdas=lam)
        r = run_sim(SimPlan(inst, "two-phase", 20_000, 8, (6,), lambdas=lam))[0]
        # 99.9% level so three cells rarely miss by chance
        lo, hi = wilson_interval(r.error_counts, r.trials, z=3.29)
        assert np.all((lo <= ex.per_hypothesis_error) & (ex.per_hypothesis_error <= hi))


class TestSequentialSim:
    INST = ProblemInstance(([0.85, 0.15], [0.2, 0.8]), alpha=1.0)

    def test_thread_count_does_not_change_tallies(self):
        a = run_sequential(self.INST, [1e-2], trials=1500, seed=6, threads=1)[0]
        b = run_sequential(self.INST, [1e-2], trials=1500, seed=6, threads=3)[0]
        for f in ("error_counts", "tau_sum", "tau_sq_sum", "full_psi_counts", "truncated_counts"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))

    def test_truncation_counted(self):
        r = run_sequential(self.INST, [1e-3], trials=200, seed=1, max_steps=3)[0]
        assert r.truncated_counts.tolist() == [200, 200]
        assert np.all(r.mean_tau == 3) and np.all(r.error_counts == 0)

    def test_smaller_beta_waits_longer(self):
        res = run_sequential(self.INST, [1e-1, 1e-3], trials=1000, seed=2)
        assert np.all(res[1].mean_tau > res[0].mean_tau)

    @pytest.mark.parametrize("kw", [dict(trials=0), dict(betas=[1.0])])
    def test_validation(self, kw):
        base = dict(betas=[0.1], trials=10, seed=1)
        with pytest.raises(ValueError):
            run_sequential(self.INST, **{**base, **kw})


class TestWilson:
    def test_doubling_trials_shrinks_by_sqrt2(self):
        lo1, hi1 = wilson_interval(3000, 100_000)
        lo2, hi2 = wilson_interval(6000, 200_000)
        assert (hi1 - lo1) / (hi2 - lo2) == pytest.approx(math.sqrt(2), rel=1e-2)

    def test_simulated_halfwidth_scaling(self):
        plan = dict(instance=BINARY, test_kind="two-phase", seed=9, n_grid=(6,), lambdas=(0.03, 0.02))
        a = run_sim(SimPlan(trials=20_000, **plan))[0].wilson_halfwidth
        b = run_sim(SimPlan(trials=40_000, **plan))[0].wilson_halfwidth
        np.testing.assert_allclose(a / b, math.sqrt(2), rtol=0.05)

    def test_zero_cell_upper_bound(self):
        r = SimResult(10, np.array([1000, 1000]), np.array([0, 7]), np.zeros(2, int), np.zeros(2, int), np.zeros(2, int))
        est = r.error_estimate()
        assert est[0] == pytest.approx(float(wilson_upper_one_sided(0, 1000)))
        assert 0 < est[0] < 0.01 and est[1] == 0.007

    @given(st.integers(0, 500), st.integers(1, 500))
    def test_interval_contains_estimate(self, c, extra):
        t = c + extra
        lo, hi = wilson_interval(c, t)
        assert 0 <= lo <= c / t <= hi <= 1


class TestSlopeFit:
    def test_exact_exponential(self):
        n = np.array([100, 200, 400, 800])
        rate, _ = fit_decay(n, np.exp(-0.01 * n))
        assert rate == pytest.approx(0.01, abs=1e-6)

    def test_constant_errors(self):
        rate, _ = fit_decay([10, 20, 30], [0.2, 0.2, 0.2])
        assert rate == pytest.approx(0.0, abs=1e-12)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            fit_decay([10], [0.1])

    def test_excludes_zero_cells(self):
        ns = (50, 100, 150, 200)
        trials = np.array([10**6, 10**6])
        counts = [np.array([round(1e6 * math.exp(-0.03 * n)), 0 if n == 200 else 5]) for n in ns]
        res = [SimResult(n, trials, c, c, np.zeros(2, int), np.zeros(2, int)) for n, c in zip(ns, counts)]
        fit = slope_fit(res)
        assert fit.rates[0] == pytest.approx(0.03, rel=1e-3)
        assert fit.excluded == ((), (200,))
        assert fit.rates[1] == pytest.approx(0.0, abs=1e-12)

    def test_rejects_bad_which(self):
        with pytest.raises(ValueError):
            slope_fit([], which="tau")
