"""``exponent-lab`` command line: run one scenario from a TOML config, write CSV.

Exit codes: 0 success, 2 configuration error, 3 exact-enumeration size guard.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import SCENARIOS, ConfigError, ExperimentConfig, load_config, validate
from .divergence import gjs
from .montecarlo import (
    SimPlan,
    SizeGuardError,
    default_threads,
    exact_enumerate,
    run_sequential,
    run_sim,
)
from .solver.bayes import (
    LambdaNotAdmissible,
    baseline_exponents,
    bayes_optimize,
    excess_exponents,
    second_phase_exponents,
    threshold_bayes_optimize,
    threshold_test_exponents,
    tradeoff_frontier,
    two_phase_exponents,
)
from .solver.exponents import binary_f

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3

# agreement of every exponent operation with exhaustive grid scanning, as
# checked by the grid-oracle test corpus; printed next to theory numbers
THEORY_TOL = 1e-4


def fmt(x) -> str:
    """Locale-independent numeric formatting with 12 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


@dataclasses.dataclass
class Artifact:
    """One CSV table plus summary lines tagged ``[theory]`` or ``[simulation]``."""

    header: list
    rows: list = dataclasses.field(default_factory=list)
    summary: list = dataclasses.field(default_factory=list)
    warnings: list = dataclasses.field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.header):
            raise ValueError("row does not match the header")
        self.rows.append([fmt(v) for v in values])

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


def _label(j: int) -> str:
    return f"H{j + 1}"


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


def _report_or_fixed(inst, lambdas, problem, solver, art: Artifact):
    try:
        return two_phase_exponents(inst, lambdas, problem, solver)
    except LambdaNotAdmissible as exc:
        art.warnings.append(f"{exc}; continuing in the fixed-length regime")
        return two_phase_exponents(inst, [0.0] * inst.M, problem, solver)


def scenario_exponents(cfg: ExperimentConfig, args) -> Artifact:
    art = Artifact(
        ["gamma", "k", "hypothesis", "lambda", "excess_exponent", "second_phase_exponent",
         "exponent", "fixed_length", "sequential", "regime", "tolerance"]
    )
    for g, kk in cfg.sweep.pairs(cfg.gamma, cfg.k):
        inst = cfg.instance(gamma=g, k=kk)
        if cfg.lambdas is not None:
            rep = _report_or_fixed(inst, cfg.lambdas, cfg.problem, cfg.solver, art)
        else:
            rep = bayes_optimize(inst, cfg.problem, cfg.solver)
        base = baseline_exponents(inst, cfg.problem)
        exc = rep.excess or tuple(excess_exponents(inst, rep.lambda_used, cfg.problem, cfg.solver))
        sec = rep.second_phase or tuple(second_phase_exponents(inst, cfg.problem, cfg.solver))
        for j in range(inst.M):
            art.add(g, kk, _label(j), rep.lambda_used[j], exc[j], sec[j], rep.per_hypothesis[j],
                    base["fixed-length"].per_hypothesis[j], base["sequential"].per_hypothesis[j],
                    rep.regime_note, THEORY_TOL)
        art.summary.append(
            f"[theory] gamma={fmt(g)} k={fmt(kk)}: bayesian exponent {fmt(rep.bayesian)} "
            f"(+/- {fmt(THEORY_TOL)}), regime {rep.regime_note}"
        )
    return art


def scenario_tradeoff(cfg: ExperimentConfig, args) -> Artifact:
    art = Artifact(["gamma", "k", "point", "lambda_1", "lambda_2", "exponent_1", "exponent_2", "tolerance"])
    for g, kk in cfg.sweep.pairs(cfg.gamma, cfg.k):
        inst = cfg.instance(gamma=g, k=kk)
        pts = tradeoff_frontier(inst, cfg.sweep.n_points, cfg.problem, cfg.solver)
        for p_i, p in enumerate(pts):
            art.add(g, kk, p_i, p.lambdas[0], p.lambdas[1], p.exponents[0], p.exponents[1], THEORY_TOL)
    inst = cfg.instance()
    base = baseline_exponents(inst, cfg.problem)
    for key in ("fixed-length", "sequential"):
        e = base[key].per_hypothesis
        art.summary.append(f"[theory] {key} exponents ({fmt(e[0])}, {fmt(e[1])})")
    return art


def scenario_bayes_table(cfg: ExperimentConfig, args) -> Artifact:
    art = Artifact(["test", "gamma", "k", "bayesian", "bayesian_per_n", "regime", "tolerance"])
    inst = cfg.instance()
    base = baseline_exponents(inst, cfg.problem)
    seq = base["sequential"]
    art.add("sequential", None, None, seq.bayesian, seq.bayesian_per_n, seq.regime_note, THEORY_TOL)
    for g, kk in cfg.sweep.pairs(cfg.gamma, cfg.k):
        rep = bayes_optimize(cfg.instance(gamma=g, k=kk), cfg.problem, cfg.solver)
        art.add("two-phase", g, kk, rep.bayesian, rep.bayesian_per_n, rep.regime_note, THEORY_TOL)
        art.summary.append(f"[theory] two-phase gamma={fmt(g)} k={fmt(kk)}: {fmt(rep.bayesian)}")
    fixed = base["fixed-length"]
    art.add("fixed-length", None, None, fixed.bayesian, fixed.bayesian_per_n, fixed.regime_note, THEORY_TOL)
    art.summary.insert(0, f"[theory] sequential: {fmt(seq.bayesian)}")
    art.summary.append(f"[theory] fixed-length: {fmt(fixed.bayesian)}")
    return art


def scenario_ht_compare(cfg: ExperimentConfig, args) -> Artifact:
    art = Artifact(["gamma", "k", "hypothesis", "lambda", "two_phase", "fixed_length", "sequential", "tolerance"])
    for g, kk in cfg.sweep.pairs(cfg.gamma, cfg.k):
        inst = cfg.instance(gamma=g, k=kk)
        if cfg.lambdas is not None:
            rep = _report_or_fixed(inst, cfg.lambdas, "hypothesis", cfg.solver, art)
        else:
            rep = bayes_optimize(inst, "hypothesis", cfg.solver)
        base = baseline_exponents(inst, "hypothesis")
        for j in range(inst.M):
            art.add(g, kk, _label(j), rep.lambda_used[j], rep.per_hypothesis[j],
                    base["fixed-length"].per_hypothesis[j], base["sequential"].per_hypothesis[j], THEORY_TOL)
        art.summary.append(f"[theory] gamma={fmt(g)} k={fmt(kk)}: two-phase bayesian {fmt(rep.bayesian)}")
    return art


def scenario_binary_compare(cfg: ExperimentConfig, args) -> Artifact:
    art = Artifact(["gamma", "k", "nn_two_phase", "threshold_two_phase", "fixed_length", "sequential", "tolerance"])
    for g, kk in cfg.sweep.pairs(cfg.gamma, cfg.k):
        inst = cfg.instance(gamma=g, k=kk)
        nn = bayes_optimize(inst, "classification", cfg.solver)
        th = threshold_bayes_optimize(inst, cfg.solver)
        base = baseline_exponents(inst)
        art.add(g, kk, nn.bayesian, th.bayesian, base["fixed-length"].bayesian, base["sequential"].bayesian, THEORY_TOL)
        art.summary.append(
            f"[theory] gamma={fmt(g)} k={fmt(kk)}: nn {fmt(nn.bayesian)}, threshold {fmt(th.bayesian)}"
        )
    return art


def _sim_theory(cfg: ExperimentConfig, art: Artifact):
    """Exponent bound and excess-length exponent per hypothesis, or blanks."""
    inst = cfg.instance()
    M = inst.M
    test = cfg.sim.test
    blank = [None] * M
    try:
        if test == "two-phase":
            rep = _report_or_fixed(inst, cfg.lambdas, "classification", cfg.solver, art)
            return list(rep.per_hypothesis), list(rep.excess) or blank
        if test == "two-phase-ht":
            rep = _report_or_fixed(inst, cfg.lambdas, "hypothesis", cfg.solver, art)
            return list(rep.per_hypothesis), list(rep.excess) or blank
        if test == "threshold":
            rep = threshold_test_exponents(inst, cfg.lambdas, cfg.lam, cfg.solver)
            exc = [binary_f(inst, i, cfg.lambdas[1 - i], cfg.solver) for i in range(2)]
            return list(rep.per_hypothesis), exc
        return [cfg.lam] * M, blank  # Gutman's test: exponent at least lam
    except LambdaNotAdmissible as exc:
        art.warnings.append(f"{exc}; theory columns left blank")
        return blank, blank


def scenario_simulate(cfg: ExperimentConfig, args) -> Artifact:
    inst = cfg.instance()
    sim = cfg.sim
    if sim.test == "sequential":
        art = Artifact(["beta", "hypothesis", "trials", "errors", "error_rate", "tau_mean", "tau_stderr",
                        "full_psi", "truncated", "tau_slope_theory"])
        res = run_sequential(inst, sim.betas, sim.trials, sim.seed, sim.max_steps, threads=sim.threads)
        for r in res:
            for j in range(inst.M):
                G = min(gjs(inst.probs(i), inst.probs(j), inst.alpha) for i in range(inst.M) if i != j)
                art.add(r.beta, _label(j), r.trials[j], r.error_counts[j], r.per_hypothesis_error[j],
                        r.mean_tau[j], r.tau_stderr[j], r.full_psi_counts[j], r.truncated_counts[j], 1.0 / G)
            art.summary.append(f"[simulation] beta={fmt(r.beta)}: mean tau {', '.join(fmt(t) for t in r.mean_tau)}")
        return art
    art = Artifact(["n", "hypothesis", "trials", "errors", "error_estimate", "wilson_halfwidth", "excess_rate",
                    "reject_rate", "tau_mean", "exponent_bound", "excess_exponent_bound", "exact_error",
                    "exact_excess"])
    lam = cfg.lam if cfg.lam is not None else 0.0
    lambdas = cfg.lambdas if cfg.lambdas is not None else ()
    plan = SimPlan(inst, sim.test, sim.trials, sim.seed, sim.n_grid, lambdas, lam, threads=sim.threads)
    results = run_sim(plan)
    bound, exc_bound = _sim_theory(cfg, art)
    for r in results:
        ex = exact_enumerate(inst, sim.test, r.n, lambdas, lam) if sim.exact else None
        est = r.error_estimate()
        for j in range(inst.M):
            art.add(r.n, _label(j), r.trials[j], r.error_counts[j], est[j], r.wilson_halfwidth[j],
                    r.excess_rate[j], r.reject_rate[j], r.mean_tau[j], bound[j], exc_bound[j],
                    None if ex is None else ex.per_hypothesis_error[j],
                    None if ex is None else ex.excess_prob[j])
        art.summary.append(f"[simulation] n={r.n}: error {', '.join(fmt(e) for e in est)}")
    if bound[0] is not None:
        art.summary.append(f"[theory] exponent bounds {', '.join(fmt(b) for b in bound)}")
    return art


SCENARIO_FUNCS: dict[str, Callable[[ExperimentConfig, argparse.Namespace], Artifact]] = {
    "exponents": scenario_exponents,
    "tradeoff-sweep": scenario_tradeoff,
    "bayes-table": scenario_bayes_table,
    "simulate": scenario_simulate,
    "ht-compare": scenario_ht_compare,
    "binary-compare": scenario_binary_compare,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    sim = cfg.sim
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    changes["threads"] = args.threads if args.threads is not None else max(sim.threads, default_threads())
    return dataclasses.replace(cfg, sim=dataclasses.replace(sim, **changes))


def run(cfg: ExperimentConfig, out_dir: str | Path | None, args=None, stdout=None) -> int:
    """Validate, run the scenario and write ``<out>/<scenario>.csv``; returns the exit status."""
    stdout = stdout or sys.stdout
    diags = validate(cfg)
    for d in diags:
        print(str(d), file=sys.stderr)
    if any(d.level == "error" for d in diags):
        guard = any(d.field == "sim.exact" for d in diags if d.level == "error")
        return EXIT_GUARD if guard else EXIT_CONFIG
    try:
        art = SCENARIO_FUNCS[cfg.scenario](cfg, args)
    except SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    for w in art.warnings:
        print(f"warning: {w}", file=sys.stderr)
    out = Path(out_dir if out_dir is not None else (cfg.out or "."))
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.scenario}.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(art.csv_text())
    print("summary", file=stdout)
    for line in art.summary:
        print(f"  {line}", file=stdout)
    print(f"  wrote {path}", file=stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exponent-lab", description=__doc__.splitlines()[0])
    p.add_argument("scenario", choices=SCENARIOS + ("validate",))
    p.add_argument("--config", required=True, help="TOML experiment config")
    p.add_argument("--out", help="output directory (default: [output].path or .)")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--threads", type=int, help="worker threads (default: $EXPONENT_LAB_THREADS or 1)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    scenario = None if args.scenario == "validate" else args.scenario
    try:
        cfg = load_config(args.config, scenario)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(str(d), file=sys.stderr)
        return EXIT_CONFIG
    cfg = _apply_overrides(cfg, args)
    if args.scenario == "validate":
        diags = validate(cfg)
        for d in diags:
            print(str(d))
        return EXIT_CONFIG if any(d.level == "error" for d in diags) else EXIT_OK
    return run(cfg, args.out, args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
