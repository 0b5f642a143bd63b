"""Experiment configuration: a TOML document with nested tables.

Example (every scenario reads the tables it needs and ignores the rest)::

    scenario = "bayes-table"

    [instance]
    distributions = [[0.3, 0.3, 0.4], [0.4, 0.5, 0.1], [0.1, 0.7, 0.2]]
    alpha = 1.0
    k = 1.0
    gamma = 0.0
    problem = "hypothesis"      # or "classification"
    lambdas = [0.004, 0.0008]   # optional phase-1 thresholds
    lam = 0.003                 # Gutman / threshold-test phase-2 threshold

    [solver]
    grid_step = 0.01            # optional; default depends on alphabet size

    [sweep]
    rows = [{gamma = 1e-8, k = 10}, {gamma = 0.001, k = 2.2}]
    gammas = [0.0, 0.01]        # alternative: gammas x ks
    ks = [2.0]
    n_points = 21

    [sim]
    test = "two-phase"          # gutman | threshold | two-phase-ht | sequential
    trials = 10000
    seed = 1
    n_grid = [200, 400]
    betas = [1e-2, 1e-3]        # sequential test only
    max_steps = 1000000
    exact = false               # add exact enumeration columns

    [output]
    path = "out"
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .divergence import SIMPLEX_TOL
from .montecarlo import EXACT_GUARD, TEST_KINDS, exact_size
from .solver.core import SolverConfig
from .solver.instance import ProblemInstance

SCENARIOS = ("exponents", "tradeoff-sweep", "bayes-table", "simulate", "ht-compare", "binary-compare")
PROBLEMS = ("classification", "hypothesis")
SIM_TESTS = tuple(TEST_KINDS) + ("sequential",)


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.field}: {self.message}"


class ConfigError(ValueError):
    """The configuration cannot be parsed or fails validation."""

    def __init__(self, diagnostics: list[Diagnostic]) -> None:
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SweepSpec:
    rows: tuple = ()  # ((gamma, k), ...)
    n_points: int = 21

    def pairs(self, default_gamma: float, default_k: float) -> tuple:
        return self.rows or ((default_gamma, default_k),)


@dataclass(frozen=True)
class SimSpec:
    test: str = "two-phase"
    trials: int = 1000
    seed: int = 0
    n_grid: tuple = ()
    betas: tuple = ()
    max_steps: int = 10**6
    exact: bool = False
    threads: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    distributions: tuple
    alpha: float = 1.0
    k: float = 1.0
    gamma: float = 0.0
    problem: str = "classification"
    lambdas: tuple | None = None
    lam: float | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    sim: SimSpec = field(default_factory=SimSpec)
    out: str | None = None
    source: str = "<config>"

    def instance(self, **changes) -> ProblemInstance:
        base = dict(alpha=self.alpha, k=self.k, gamma=self.gamma)
        base.update(changes)
        return ProblemInstance(self.distributions, **base)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _num(tbl: dict, key: str, where: str, diags: list, default=None, kind=float):
    if key not in tbl:
        return default
    v = tbl[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        diags.append(Diagnostic("error", f"{where}.{key}", f"expected a number, got {v!r}"))
        return default
    if kind is int:
        if int(v) != v:
            diags.append(Diagnostic("error", f"{where}.{key}", f"expected an integer, got {v!r}"))
            return default
        return int(v)
    return float(v)


def _vec(tbl: dict, key: str, where: str, diags: list, kind=float):
    if key not in tbl:
        return None
    v = tbl[key]
    if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        diags.append(Diagnostic("error", f"{where}.{key}", "expected a list of numbers"))
        return None
    return tuple(kind(x) for x in v)


def _table(doc: dict, key: str, diags: list) -> dict:
    v = doc.get(key, {})
    if not isinstance(v, dict):
        diags.append(Diagnostic("error", key, "expected a table"))
        return {}
    return v


_KNOWN = {
    "": {"scenario", "instance", "solver", "sweep", "sim", "output"},
    "instance": {"distributions", "alpha", "k", "gamma", "problem", "lambdas", "lam"},
    "solver": {"grid_step", "n_seeds", "lattice_budget", "refine_tol", "max_refine_iters"},
    "sweep": {"rows", "gammas", "ks", "n_points"},
    "sim": {"test", "trials", "seed", "n_grid", "betas", "max_steps", "exact", "threads"},
    "output": {"path"},
}


def parse_config(doc: dict[str, Any], scenario: str | None = None, source: str = "<config>") -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed TOML document.

    Raises :class:`ConfigError` listing every field problem found.
    """
    diags: list[Diagnostic] = []
    for section, keys in _KNOWN.items():
        tbl = doc if section == "" else doc.get(section, {})
        if isinstance(tbl, dict):
            for key in tbl:
                if key not in keys:
                    name = key if section == "" else f"{section}.{key}"
                    diags.append(Diagnostic("error", name, "unknown field"))

    file_scen = doc.get("scenario")
    if file_scen is not None and scenario is not None and file_scen != scenario:
        diags.append(Diagnostic("error", "scenario", f"config is for {file_scen!r}, command asked for {scenario!r}"))
    scen = scenario or file_scen
    if scen not in SCENARIOS:
        diags.append(Diagnostic("error", "scenario", f"expected one of {', '.join(SCENARIOS)}, got {scen!r}"))

    inst = _table(doc, "instance", diags)
    dists = inst.get("distributions")
    if (
        not isinstance(dists, list)
        or not dists
        or not all(isinstance(r, list) and r and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in r) for r in dists)
    ):
        diags.append(Diagnostic("error", "instance.distributions", "expected a list of probability vectors"))
        dists = ()
    else:
        dists = tuple(tuple(float(x) for x in r) for r in dists)
    problem = inst.get("problem", "classification")
    if problem not in PROBLEMS:
        diags.append(Diagnostic("error", "instance.problem", f"expected one of {PROBLEMS}, got {problem!r}"))

    sol = _table(doc, "solver", diags)
    solver = SolverConfig(
        grid_step=_num(sol, "grid_step", "solver", diags),
        n_seeds=_num(sol, "n_seeds", "solver", diags, 6, int),
        lattice_budget=_num(sol, "lattice_budget", "solver", diags, 4_000_000, int),
        refine_tol=_num(sol, "refine_tol", "solver", diags, 1e-12),
        max_refine_iters=_num(sol, "max_refine_iters", "solver", diags, 400, int),
    )

    sw = _table(doc, "sweep", diags)
    rows: list = []
    if "rows" in sw:
        if not isinstance(sw["rows"], list) or not sw["rows"]:
            diags.append(Diagnostic("error", "sweep.rows", "expected a non-empty list of {gamma, k} tables"))
        else:
            for r_i, r in enumerate(sw["rows"]):
                if not isinstance(r, dict) or set(r) - {"gamma", "k"}:
                    diags.append(Diagnostic("error", f"sweep.rows[{r_i}]", "expected a table with gamma and k"))
                    continue
                g = _num(r, "gamma", f"sweep.rows[{r_i}]", diags, _num(inst, "gamma", "instance", [], 0.0))
                kk = _num(r, "k", f"sweep.rows[{r_i}]", diags, _num(inst, "k", "instance", [], 1.0))
                rows.append((g, kk))
    gammas = _vec(sw, "gammas", "sweep", diags)
    ks = _vec(sw, "ks", "sweep", diags)
    if gammas is not None or ks is not None:
        if rows:
            diags.append(Diagnostic("error", "sweep", "give either rows or gammas/ks, not both"))
        g_list = gammas if gammas is not None else (_num(inst, "gamma", "instance", [], 0.0),)
        k_list = ks if ks is not None else (_num(inst, "k", "instance", [], 1.0),)
        if not g_list or not k_list:
            diags.append(Diagnostic("error", "sweep", "sweep ranges must not be empty"))
        rows = [(g, kk) for kk in k_list for g in g_list]
    sweep = SweepSpec(tuple(rows), _num(sw, "n_points", "sweep", diags, 21, int))

    sm = _table(doc, "sim", diags)
    test = sm.get("test", "two-phase")
    if test not in SIM_TESTS:
        diags.append(Diagnostic("error", "sim.test", f"expected one of {SIM_TESTS}, got {test!r}"))
    exact = sm.get("exact", False)
    if not isinstance(exact, bool):
        diags.append(Diagnostic("error", "sim.exact", "expected true or false"))
        exact = False
    sim = SimSpec(
        test=test,
        trials=_num(sm, "trials", "sim", diags, 1000, int),
        seed=_num(sm, "seed", "sim", diags, 0, int),
        n_grid=_vec(sm, "n_grid", "sim", diags, int) or (),
        betas=_vec(sm, "betas", "sim", diags) or (),
        max_steps=_num(sm, "max_steps", "sim", diags, 10**6, int),
        exact=exact,
        threads=_num(sm, "threads", "sim", diags, 1, int),
    )
    if "n_grid" in sm and isinstance(sm["n_grid"], list) and not sm["n_grid"]:
        diags.append(Diagnostic("error", "sim.n_grid", "n_grid must not be empty"))

    out = _table(doc, "output", diags).get("path")
    lam = _num(inst, "lam", "instance", diags)
    cfg = ExperimentConfig(
        scenario=scen if scen in SCENARIOS else "exponents",
        distributions=dists,
        alpha=_num(inst, "alpha", "instance", diags, 1.0),
        k=_num(inst, "k", "instance", diags, 1.0),
        gamma=_num(inst, "gamma", "instance", diags, 0.0),
        problem=problem if problem in PROBLEMS else "classification",
        lambdas=_vec(inst, "lambdas", "instance", diags),
        lam=lam,
        solver=solver,
        sweep=sweep,
        sim=sim,
        out=out if isinstance(out, str) else None,
        source=source,
    )
    if diags:
        raise ConfigError(diags)
    return cfg


def load_config(path: str | Path, scenario: str | None = None) -> ExperimentConfig:
    """Read and parse a TOML config; syntax errors carry line and column."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([Diagnostic("error", str(p), f"cannot read config: {exc.strerror}")]) from None
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([Diagnostic("error", str(p), f"parse error: {exc}")]) from None
    return parse_config(doc, scenario, str(p))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def validate(cfg: ExperimentConfig) -> list[Diagnostic]:
    """Semantic checks; returns diagnostics and never mutates ``cfg``.

    Errors make the run impossible; warnings flag parameter choices that
    push the test into its fixed-length regime.
    """
    from .solver.bayes import excess_exponents
    from .solver.exponents import feasible_lambda, gamma_bar

    diags: list[Diagnostic] = []

    def err(fld: str, msg: str) -> None:
        diags.append(Diagnostic("error", fld, msg))

    def warn(fld: str, msg: str) -> None:
        diags.append(Diagnostic("warning", fld, msg))

    dists = cfg.distributions
    if len(dists) < 2:
        err("instance.distributions", "need at least two distributions")
    if len({len(d) for d in dists}) > 1:
        err("instance.distributions", "all distributions must share one alphabet")
    for i, d in enumerate(dists):
        a = np.asarray(d, float)
        if a.size < 2:
            err(f"instance.distributions[{i}]", "alphabet size must be at least 2")
        elif np.any(a < 0) or not np.all(np.isfinite(a)) or abs(a.sum() - 1.0) > SIMPLEX_TOL:
            err(f"instance.distributions[{i}]", "not a probability vector (entries >= 0 summing to 1)")
    if len({tuple(d) for d in dists}) < len(dists):
        err("instance.distributions", "distributions must be distinct")
    if not (cfg.alpha > 0 and math.isfinite(cfg.alpha)):
        err("instance.alpha", "alpha must be positive")
    if not cfg.k >= 1:
        err("instance.k", "k must be >= 1")
    if not cfg.gamma >= 0:
        err("instance.gamma", "gamma must be non-negative")
    for g, kk in cfg.sweep.rows:
        if g < 0 or kk < 1:
            err("sweep", f"invalid sweep point gamma={g}, k={kk}")
    if cfg.sweep.n_points < 1:
        err("sweep.n_points", "n_points must be positive")
    M = len(dists)
    if cfg.lambdas is not None:
        if len(cfg.lambdas) != M:
            err("instance.lambdas", f"need {M} thresholds, got {len(cfg.lambdas)}")
        elif any(x < 0 for x in cfg.lambdas):
            err("instance.lambdas", "thresholds must be non-negative")
    if cfg.lam is not None and cfg.lam < 0:
        err("instance.lam", "lam must be non-negative")
    if cfg.scenario in ("tradeoff-sweep", "binary-compare") and M != 2:
        err("instance.distributions", f"{cfg.scenario} needs exactly two distributions")

    if cfg.scenario == "simulate":
        s = cfg.sim
        if s.trials < 1:
            err("sim.trials", "trials must be >= 1")
        if s.threads < 1:
            err("sim.threads", "threads must be >= 1")
        if s.test == "sequential":
            if not s.betas:
                err("sim.betas", "the sequential test needs a non-empty beta list")
            elif any(not 0 < b < 1 for b in s.betas):
                err("sim.betas", "beta must lie in (0, 1)")
            if s.max_steps < 1:
                err("sim.max_steps", "max_steps must be positive")
        else:
            if not s.n_grid:
                err("sim.n_grid", "n_grid must not be empty")
            elif any(n < 1 for n in s.n_grid) or any(b <= a for a, b in zip(s.n_grid, s.n_grid[1:])):
                err("sim.n_grid", "n_grid must be strictly increasing positive integers")
            if s.test == "gutman":
                if cfg.lam is None or cfg.lam <= 0:
                    err("instance.lam", "the Gutman test needs lam > 0")
            elif cfg.lambdas is None:
                err("instance.lambdas", f"the {s.test} test needs phase-1 thresholds")
            if s.test == "threshold":
                if M != 2:
                    err("instance.distributions", "the threshold-based test is binary")
                if cfg.lam is None:
                    err("instance.lam", "the threshold-based test needs the phase-2 threshold lam")

    if any(d.level == "error" for d in diags):
        return diags

    inst = cfg.instance()
    if cfg.scenario == "simulate" and cfg.sim.exact and cfg.sim.test != "sequential":
        for n in cfg.sim.n_grid:
            size = exact_size(inst, cfg.sim.test, n)
            if size > EXACT_GUARD:
                err("sim.exact", f"exact enumeration at n={n} visits {size} joint types, above the guard {EXACT_GUARD}")
                break

    if cfg.scenario == "simulate":
        problem = {"two-phase": "classification", "two-phase-ht": "hypothesis"}.get(cfg.sim.test)
    elif cfg.scenario == "binary-compare":
        problem = "classification"
    else:
        problem = cfg.problem
    if problem == "classification":
        gammas = [g for g, _ in cfg.sweep.pairs(cfg.gamma, cfg.k)]
        gb = min(gamma_bar(inst, j, cfg.solver) for j in range(inst.M))
        if max(gammas) > gb:
            warn("instance.gamma", f"gamma above min_j gamma_bar_j = {gb:.6g}: fixed-length regime")
    if problem is not None and cfg.lambdas is not None and any(x > 0 for x in cfg.lambdas):
        if problem == "hypothesis" and not feasible_lambda(inst, cfg.lambdas, "hypothesis"):
            warn("instance.lambdas", "thresholds outside the feasible region: fixed-length regime")
        else:
            G = excess_exponents(inst, cfg.lambdas, problem, cfg.solver)
            if G.min() < cfg.gamma - 1e-12:
                warn(
                    "instance.lambdas",
                    f"thresholds not admitted: excess-length exponent {G.min():.6g} < gamma = {cfg.gamma:.6g}",
                )
    return diags
