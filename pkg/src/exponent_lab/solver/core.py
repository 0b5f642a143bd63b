"""Minimise a weighted sum of KL divergences over a product of simplices.

Each variable ``Q_t`` carries one objective term ``w_t D(Q_t || P_t)``. The
constraints are GJS and KL inequalities between variables (or between a
variable and a fixed law). The strategy is the same for every exponent
function of the package:

1. *Normalise*. ``GJS(Q_a, Q_b) <= 0`` merges two variables into one; a zero
   KL radius pins a variable to the reference law; an unconstrained variable
   with one term sits at its target.
2. *Seed*. The remaining free variables are scanned on a product simplex
   lattice (:func:`exponent_lab.kernels.lattice_topk`), keeping the best
   feasible points and the least-violating infeasible ones.
3. *Refine*. SLSQP from each seed in softmax coordinates with analytic
   gradients. The best feasible end point wins.

No closed forms are used anywhere in this module, so the Rényi and Chernoff
closed forms elsewhere in the package remain independent cross-checks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np
from scipy.optimize import minimize

from .. import kernels
from ..divergence import DistLike, Distribution, DivergenceError, as_probs

FEAS_TOL = 1e-9
SEED_MIX = 1e-2  # uniform mass mixed into refinement starts


class SolverError(RuntimeError):
    """The solver could not produce a trustworthy answer."""


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the lattice-plus-refinement solver.

    Parameters
    ----------
    grid_step
        Finest lattice spacing. ``None`` picks 0.01 for alphabets of size at
        most 3 and 0.02 otherwise. The spacing is coarsened automatically when
        the product lattice over all free variables would exceed
        ``lattice_budget`` points.
    refine_tol
        ``ftol`` of the SLSQP refinement.
    max_refine_iters
        SLSQP iteration cap per seed.
    n_seeds
        Number of lattice seeds refined.
    lattice_budget
        Upper bound on the number of lattice tuples scanned.
    """

    grid_step: float | None = None
    refine_tol: float = 1e-12
    max_refine_iters: int = 400
    n_seeds: int = 6
    lattice_budget: int = 4_000_000

    def __post_init__(self) -> None:
        if self.grid_step is not None and not 0.0 < self.grid_step <= 0.1:
            raise ValueError(f"grid_step must lie in (0, 0.1], got {self.grid_step}")
        if not self.refine_tol > 0:
            raise ValueError("refine_tol must be positive")
        if self.max_refine_iters < 1 or self.n_seeds < 1:
            raise ValueError("max_refine_iters and n_seeds must be positive")
        if self.lattice_budget < 1:
            raise ValueError("lattice_budget must be positive")

    def step_for(self, d: int) -> float:
        if self.grid_step is not None:
            return self.grid_step
        return 0.01 if d <= 3 else 0.02


DEFAULT_CONFIG = SolverConfig()


# ---------------------------------------------------------------------------
# constraints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GJSBound:
    """``GJS(Q_a, Q_b, alpha) <= bound``."""

    a: int
    b: int
    alpha: float
    bound: float


@dataclass(frozen=True)
class KLBound:
    """``D(Q_a || ref) <= bound``."""

    a: int
    ref: tuple
    bound: float

    def __init__(self, a: int, ref: DistLike, bound: float) -> None:
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "ref", tuple(float(x) for x in as_probs(ref)))
        object.__setattr__(self, "bound", bound)


@dataclass(frozen=True)
class GJSOrder:
    """``GJS(Q_a, Q_c, alpha) <= GJS(Q_b, Q_c, alpha)``."""

    a: int
    b: int
    c: int
    alpha: float


@dataclass(frozen=True)
class KLOrder:
    """``D(Q_a || near) <= D(Q_a || far)``."""

    a: int
    near: tuple
    far: tuple

    def __init__(self, a: int, near: DistLike, far: DistLike) -> None:
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "near", tuple(float(x) for x in as_probs(near)))
        object.__setattr__(self, "far", tuple(float(x) for x in as_probs(far)))


Constraint = Union[GJSBound, KLBound, GJSOrder, KLOrder]


@dataclass(frozen=True)
class Solution:
    """Result of :func:`min_weighted_kl`.

    Unpacks as ``value, argmin``. ``argmin`` is empty when the feasible set is
    empty (``value == inf``).
    """

    value: float
    argmin: tuple = ()
    converged: bool = True
    note: str = ""

    def __iter__(self) -> Iterator:
        yield self.value
        yield self.argmin


# ---------------------------------------------------------------------------
# numerics on raw arrays
# ---------------------------------------------------------------------------


def _safe_log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def _kl_and_grad(q: np.ndarray, logq: np.ndarray, logp: np.ndarray, sup: np.ndarray):
    diff = logq[sup] - logp[sup]
    g = np.zeros_like(q)
    g[sup] = diff + 1.0
    return float(np.dot(q[sup], diff)), g


def _gjs_and_grads(a, loga, b, logb, alpha):
    """GJS(a, b) and its gradients; ``log(a/m)`` via log1p for large alpha."""
    sa = a > 0
    sb = b > 0
    la = np.zeros_like(a)
    lb = np.zeros_like(b)
    with np.errstate(invalid="ignore", over="ignore"):
        # log(a/m) = -log1p((b/a - 1) / (1 + alpha))
        r = np.clip(logb[sa] - loga[sa], -np.inf, 700.0)
        la[sa] = -np.log1p(np.expm1(r) / (1.0 + alpha))
        r = np.clip(loga[sb] - logb[sb], -np.inf, 700.0)
        lb[sb] = -np.log1p(alpha * np.expm1(r) / (1.0 + alpha))
    val = alpha * float(np.dot(a[sa], la[sa])) + float(np.dot(b[sb], lb[sb]))
    return max(val, 0.0), alpha * la, lb


# ---------------------------------------------------------------------------
# normalisation
# ---------------------------------------------------------------------------


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


@dataclass
class _Group:
    members: list
    terms: list  # (weight, target array)
    support: np.ndarray
    pinned: np.ndarray | None = None
    constrained: bool = False
    lattice: np.ndarray | None = None
    offset: int = -1  # start of this group's logits in the SLSQP vector


@dataclass
class _Problem:
    d: int
    groups: list
    constraints: list  # constraints re-indexed to group ids
    var_group: list
    notes: list = field(default_factory=list)


def _validate(targets, weights, constraints):
    if len(targets) == 0:
        raise DivergenceError("at least one variable is required")
    if len(weights) != len(targets):
        raise DivergenceError(f"{len(weights)} weights for {len(targets)} targets")
    P = [np.asarray(as_probs(t), dtype=float) for t in targets]
    d = P[0].size
    if any(p.shape != (d,) for p in P):
        raise DivergenceError("all targets must share one alphabet")
    w = [float(x) for x in weights]
    if any(not x > 0 or not math.isfinite(x) for x in w):
        raise DivergenceError(f"weights must be positive and finite: {w}")
    T = len(P)

    def chk(i):
        if not 0 <= int(i) < T:
            raise DivergenceError(f"constraint references variable {i} outside 0..{T - 1}")

    for c in constraints:
        if isinstance(c, GJSBound):
            chk(c.a), chk(c.b)
            if not c.alpha > 0:
                raise DivergenceError("GJS constraint needs alpha > 0")
        elif isinstance(c, GJSOrder):
            chk(c.a), chk(c.b), chk(c.c)
            if not c.alpha > 0:
                raise DivergenceError("GJS constraint needs alpha > 0")
        elif isinstance(c, KLBound):
            chk(c.a)
            if len(c.ref) != d:
                raise DivergenceError("KL constraint reference has the wrong dimension")
        elif isinstance(c, KLOrder):
            chk(c.a)
            if len(c.near) != d or len(c.far) != d:
                raise DivergenceError("KL order references have the wrong dimension")
        else:
            raise DivergenceError(f"unknown constraint type {type(c).__name__}")
    return P, w, d


def _normalise(P, w, d, constraints) -> _Problem | None:
    """Merge, pin and re-index. Returns ``None`` when provably infeasible."""
    T = len(P)
    uf = _UnionFind(T)
    cons = list(constraints)
    for c in cons:
        if isinstance(c, (GJSBound, KLBound)) and c.bound < 0:
            return None
    changed = True
    while changed:
        changed = False
        for c in cons:
            if isinstance(c, GJSBound) and c.bound <= 0:
                changed |= uf.union(c.a, c.b)
            elif isinstance(c, GJSOrder) and uf.find(c.b) == uf.find(c.c):
                # GJS(Q_a, Q_c) <= 0
                changed |= uf.union(c.a, c.c)

    roots = sorted({uf.find(t) for t in range(T)})
    gid = {r: g for g, r in enumerate(roots)}
    var_group = [gid[uf.find(t)] for t in range(T)]
    groups = [_Group(members=[], terms=[], support=np.ones(d, bool)) for _ in roots]
    for t in range(T):
        g = groups[var_group[t]]
        g.members.append(t)
        g.terms.append((w[t], P[t]))
        # a finite objective needs supp(Q) inside every target support
        g.support &= P[t] > 0

    out = []
    for c in cons:
        if isinstance(c, GJSBound):
            a, b = var_group[c.a], var_group[c.b]
            if a != b:
                out.append(GJSBound(a, b, c.alpha, c.bound))
        elif isinstance(c, GJSOrder):
            a, b, cc = var_group[c.a], var_group[c.b], var_group[c.c]
            if a != b and a != cc:
                out.append(GJSOrder(a, b, cc, c.alpha))
        elif isinstance(c, KLBound):
            a = var_group[c.a]
            ref = np.asarray(c.ref)
            groups[a].support &= ref > 0
            if c.bound <= 0:
                if groups[a].pinned is not None and not np.array_equal(groups[a].pinned, ref):
                    return None
                groups[a].pinned = ref
            else:
                out.append(KLBound(a, ref, c.bound))
        else:
            out.append(KLOrder(var_group[c.a], np.asarray(c.near), np.asarray(c.far)))

    for g in groups:
        if g.pinned is not None and np.any(g.pinned[~g.support] > 0):
            return None  # pinned law charges a symbol some target forbids
        if g.pinned is None and not np.any(g.support):
            return None
    for c in out:
        for v in _vars_of(c):
            groups[v].constrained = True
    for g in groups:
        if g.pinned is None and not g.constrained and len(g.terms) == 1:
            g.pinned = g.terms[0][1].copy()
    return _Problem(d=d, groups=groups, constraints=out, var_group=var_group)


def _vars_of(c) -> tuple:
    if isinstance(c, GJSBound):
        return (c.a, c.b)
    if isinstance(c, GJSOrder):
        return (c.a, c.b, c.c)
    return (c.a,)


# ---------------------------------------------------------------------------
# evaluation of a full assignment
# ---------------------------------------------------------------------------


def _objective(prob: _Problem, Qs: list) -> float:
    total = 0.0
    for g, q in zip(prob.groups, Qs):
        for wt, p in g.terms:
            sup = q > 0
            if np.any(p[sup] <= 0):
                return math.inf
            total += wt * float(np.sum(q[sup] * np.log(q[sup] / p[sup])))
    return total


def _raw_kl(q, p):
    p = np.asarray(p)
    sup = q > 0
    if np.any(p[sup] <= 0):
        return math.inf
    return float(np.sum(q[sup] * np.log(q[sup] / p[sup])))


def _raw_gjs(a, b, alpha):
    return _gjs_and_grads(a, _safe_log(a), b, _safe_log(b), alpha)[0]


def _slacks(prob: _Problem, Qs: list) -> np.ndarray:
    out = []
    for c in prob.constraints:
        if isinstance(c, GJSBound):
            out.append(c.bound - _raw_gjs(Qs[c.a], Qs[c.b], c.alpha))
        elif isinstance(c, KLBound):
            out.append(c.bound - _raw_kl(Qs[c.a], c.ref))
        elif isinstance(c, GJSOrder):
            out.append(_raw_gjs(Qs[c.b], Qs[c.c], c.alpha) - _raw_gjs(Qs[c.a], Qs[c.c], c.alpha))
        else:
            near, far = _raw_kl(Qs[c.a], c.near), _raw_kl(Qs[c.a], c.far)
            out.append(math.inf if far == math.inf else far - near)
    return np.asarray(out, dtype=float)


# ---------------------------------------------------------------------------
# lattice seeding
# ---------------------------------------------------------------------------


def _support_lattice(d: int, support: np.ndarray, m: int) -> np.ndarray:
    s = int(support.sum())
    if s == 1:
        pts = np.zeros((1, d))
        pts[0, support] = 1.0
        return pts
    sub = kernels.simplex_lattice(s, m)
    pts = np.zeros((sub.shape[0], d))
    pts[:, support] = sub
    return pts


def _choose_resolution(prob: _Problem, free: list, cfg: SolverConfig) -> int:
    m = max(2, int(round(1.0 / cfg.step_for(prob.d))))
    single_cap = 4096
    while m > 2:
        sizes = [kernels.lattice_size(int(prob.groups[g].support.sum()), m) for g in free]
        total = math.prod(sizes)
        if total <= cfg.lattice_budget and max(sizes) <= single_cap:
            break
        m -= 1
    return m


def _lattice_seeds(prob: _Problem, cfg: SolverConfig) -> tuple[list, int]:
    """Return seed assignments (lists of per-group arrays) and the resolution used."""
    G = len(prob.groups)
    free = [g for g in range(G) if prob.groups[g].pinned is None and prob.groups[g].constrained]
    m = _choose_resolution(prob, free, cfg) if free else 0
    lats = []
    for g, grp in enumerate(prob.groups):
        if grp.pinned is not None:
            lat = grp.pinned[None, :]
        elif not grp.constrained:
            full = _support_lattice(prob.d, grp.support, max(2, int(round(1.0 / cfg.step_for(prob.d)))))
            vals = sum(wt * kernels.kl_rows(full, p) for wt, p in grp.terms)
            lat = full[[int(np.argmin(vals))]]
        else:
            lat = _support_lattice(prob.d, grp.support, m)
        grp.lattice = lat
        lats.append(lat)

    sizes = np.array([lat.shape[0] for lat in lats], dtype=np.int64)
    Lmax = int(sizes.max())
    obj = np.full((G, Lmax), np.inf)
    for g, grp in enumerate(prob.groups):
        obj[g, : sizes[g]] = sum(wt * kernels.kl_rows(lats[g], p) for wt, p in grp.terms)

    mats, vecs = [], []
    mat_key: dict = {}

    def mat(alpha, a, b):
        key = (float(alpha), a, b)
        if key not in mat_key:
            M = np.zeros((Lmax, Lmax))
            M[: sizes[a], : sizes[b]] = kernels.gjs_matrix(lats[a], lats[b], alpha)
            mat_key[key] = len(mats)
            mats.append(M)
        return mat_key[key]

    def vec(a, ref):
        v = np.zeros(Lmax)
        v[: sizes[a]] = np.nan_to_num(kernels.kl_rows(lats[a], ref), posinf=1e300)
        vecs.append(v)
        return len(vecs) - 1

    C = len(prob.constraints)
    kinds = np.zeros(C, np.int64)
    ia, ib, ic, m1, m2 = (np.zeros(C, np.int64) for _ in range(5))
    bounds = np.zeros(C)
    for n, c in enumerate(prob.constraints):
        if isinstance(c, GJSBound):
            kinds[n], ia[n], ib[n], bounds[n] = kernels.KIND_MAT_LE, c.a, c.b, c.bound
            m1[n] = mat(c.alpha, c.a, c.b)
        elif isinstance(c, KLBound):
            kinds[n], ia[n], bounds[n] = kernels.KIND_VEC_LE, c.a, c.bound
            m1[n] = vec(c.a, c.ref)
        elif isinstance(c, GJSOrder):
            kinds[n], ia[n], ib[n], ic[n] = kernels.KIND_MAT_ORDER, c.a, c.b, c.c
            m1[n], m2[n] = mat(c.alpha, c.a, c.c), mat(c.alpha, c.b, c.c)
        else:
            kinds[n], ia[n] = kernels.KIND_VEC_ORDER, c.a
            m1[n], m2[n] = vec(c.a, c.near), vec(c.a, c.far)
    mats_arr = np.stack(mats) if mats else np.zeros((1, 1, 1))
    vecs_arr = np.stack(vecs) if vecs else np.zeros((1, 1))

    k = max(cfg.n_seeds, 2)
    best_idx, best_val, viol_idx, _ = kernels.lattice_topk(
        obj, sizes, kinds, ia, ib, ic, m1, m2, bounds, mats_arr, vecs_arr, k
    )
    chosen = [int(i) for i in best_idx if i >= 0]
    n_feasible = len(chosen)
    # keep a few near-feasible points when the lattice barely meets the set
    n_extra = max(0, min(3, k - n_feasible)) if n_feasible < cfg.n_seeds else 0
    chosen += [int(i) for i in viol_idx[:n_extra] if i >= 0]
    seeds = []
    for flat in chosen:
        idx = np.unravel_index(flat, tuple(int(s) for s in sizes))
        seeds.append([lats[g][int(idx[g])].copy() for g in range(G)])
    return seeds, n_feasible


# ---------------------------------------------------------------------------
# SLSQP refinement in softmax coordinates
# ---------------------------------------------------------------------------


class _Refiner:
    def __init__(self, prob: _Problem) -> None:
        self.prob = prob
        self.free = []
        off = 0
        for g, grp in enumerate(prob.groups):
            s = int(grp.support.sum())
            if grp.pinned is None and s >= 2:
                grp.offset = off
                off += s - 1
                self.free.append(g)
            elif grp.pinned is None:
                grp.pinned = grp.support.astype(float)
        self.n = off
        self.logP = [[(wt, _safe_log(p)) for wt, p in grp.terms] for grp in prob.groups]
        self._cache_x = None

    def encode(self, Qs: list) -> np.ndarray:
        x = np.zeros(self.n)
        for g in self.free:
            grp = self.prob.groups[g]
            q = Qs[g][grp.support]
            s = q.size
            # lattice seeds sit on faces where the softmax gradient vanishes;
            # optima are interior on the support, so pull the start inward
            q = (1.0 - SEED_MIX) * q / q.sum() + SEED_MIX / s
            lq = np.log(q)
            x[grp.offset : grp.offset + s - 1] = lq[:-1] - lq[-1]
        return x

    def decode(self, x: np.ndarray):
        if self._cache_x is not None and np.array_equal(x, self._cache_x):
            return self._cache
        Qs, logQs = [], []
        for grp in self.prob.groups:
            if grp.pinned is not None:
                q = grp.pinned
                Qs.append(q)
                logQs.append(_safe_log(q))
                continue
            s = int(grp.support.sum())
            u = np.append(x[grp.offset : grp.offset + s - 1], 0.0)
            u = u - u.max()
            lse = math.log(float(np.sum(np.exp(u))))
            lq = np.full(self.prob.d, -np.inf)
            lq[grp.support] = u - lse
            q = np.exp(lq)
            Qs.append(q)
            logQs.append(lq)
        self._cache_x = x.copy()
        self._cache = (Qs, logQs)
        return self._cache

    def _chain(self, g: int, q: np.ndarray, grad_q: np.ndarray, out: np.ndarray) -> None:
        grp = self.prob.groups[g]
        if grp.pinned is not None:
            return
        qs = q[grp.support]
        gs = grad_q[grp.support]
        full = qs * (gs - float(np.dot(qs, gs)))
        out[grp.offset : grp.offset + qs.size - 1] += full[:-1]

    def fun(self, x):
        Qs, logQs = self.decode(x)
        val = 0.0
        grad = np.zeros(self.n)
        for g, grp in enumerate(self.prob.groups):
            for wt, lp in self.logP[g]:
                v, gq = _kl_and_grad(Qs[g], logQs[g], lp, grp.support)
                val += wt * v
                self._chain(g, Qs[g], wt * gq, grad)
        return val, grad

    def cons(self, x):
        Qs, logQs = self.decode(x)
        out = np.empty(len(self.prob.constraints))
        for n, c in enumerate(self.prob.constraints):
            if isinstance(c, GJSBound):
                out[n] = c.bound - _gjs_and_grads(Qs[c.a], logQs[c.a], Qs[c.b], logQs[c.b], c.alpha)[0]
            elif isinstance(c, KLBound):
                sup = self.prob.groups[c.a].support
                out[n] = c.bound - _kl_and_grad(Qs[c.a], logQs[c.a], _safe_log(c.ref), sup)[0]
            elif isinstance(c, GJSOrder):
                lhs = _gjs_and_grads(Qs[c.a], logQs[c.a], Qs[c.c], logQs[c.c], c.alpha)[0]
                rhs = _gjs_and_grads(Qs[c.b], logQs[c.b], Qs[c.c], logQs[c.c], c.alpha)[0]
                out[n] = rhs - lhs
            else:
                sup = self.prob.groups[c.a].support
                out[n] = float(np.dot(Qs[c.a][sup], _safe_log(c.near)[sup] - _safe_log(c.far)[sup]))
        return out

    def cons_jac(self, x):
        Qs, logQs = self.decode(x)
        J = np.zeros((len(self.prob.constraints), self.n))
        for n, c in enumerate(self.prob.constraints):
            row = J[n]
            if isinstance(c, GJSBound):
                _, ga, gb = _gjs_and_grads(Qs[c.a], logQs[c.a], Qs[c.b], logQs[c.b], c.alpha)
                self._chain(c.a, Qs[c.a], -ga, row)
                self._chain(c.b, Qs[c.b], -gb, row)
            elif isinstance(c, KLBound):
                sup = self.prob.groups[c.a].support
                _, gq = _kl_and_grad(Qs[c.a], logQs[c.a], _safe_log(c.ref), sup)
                self._chain(c.a, Qs[c.a], -gq, row)
            elif isinstance(c, GJSOrder):
                _, ga, gc1 = _gjs_and_grads(Qs[c.a], logQs[c.a], Qs[c.c], logQs[c.c], c.alpha)
                _, gb, gc2 = _gjs_and_grads(Qs[c.b], logQs[c.b], Qs[c.c], logQs[c.c], c.alpha)
                self._chain(c.a, Qs[c.a], -ga, row)
                self._chain(c.b, Qs[c.b], gb, row)
                self._chain(c.c, Qs[c.c], gc2 - gc1, row)
            else:
                sup = self.prob.groups[c.a].support
                gq = np.zeros(self.prob.d)
                gq[sup] = _safe_log(c.near)[sup] - _safe_log(c.far)[sup]
                self._chain(c.a, Qs[c.a], gq, row)
        return J

    def run(self, seed: list, cfg: SolverConfig):
        x0 = self.encode(seed)
        if self.n == 0:
            return x0, True
        kw = dict(method="SLSQP", jac=True, options={"ftol": cfg.refine_tol, "maxiter": cfg.max_refine_iters})
        if self.prob.constraints:
            kw["constraints"] = [{"type": "ineq", "fun": self.cons, "jac": self.cons_jac}]
        with warnings.catch_warnings(), np.errstate(all="ignore"):
            warnings.simplefilter("ignore")
            res = minimize(self.fun, x0, **kw)
        x = res.x if np.all(np.isfinite(res.x)) else x0
        return x, bool(res.success)


# ---------------------------------------------------------------------------
# public entry point
# ---------------------------------------------------------------------------


def _check_refs(prob: _Problem) -> None:
    for c in prob.constraints:
        if isinstance(c, KLOrder):
            sup = prob.groups[c.a].support
            if np.any(np.asarray(c.near)[sup] <= 0) or np.any(np.asarray(c.far)[sup] <= 0):
                raise SolverError("KL order constraints need references positive on the variable's support")


def _targets_if_feasible(prob: _Problem) -> list | None:
    Qs = []
    for grp in prob.groups:
        q = grp.terms[0][1]
        if any(not np.array_equal(p, q) for _, p in grp.terms[1:]):
            return None
        if grp.pinned is not None and not np.array_equal(grp.pinned, q):
            return None
        Qs.append(q)
    if prob.constraints and np.min(_slacks(prob, Qs)) < 0:
        return None
    return Qs


def _pack(prob: _Problem, Qs: list, value: float, converged: bool, note: str) -> Solution:
    argmin = tuple(Distribution.normalized(Qs[prob.var_group[t]]) for t in range(len(prob.var_group)))
    return Solution(float(value), argmin, converged, note)


def min_weighted_kl(
    targets: Sequence[DistLike],
    weights: Sequence[float],
    constraints: Sequence[Constraint] = (),
    config: SolverConfig | None = None,
    seeds: Sequence[Sequence[DistLike]] = (),
) -> Solution:
    """Minimise ``sum_t weights[t] * D(Q_t || targets[t])`` under constraints.

    Parameters
    ----------
    targets, weights
        One target law and one positive weight per variable ``Q_t``.
    constraints
        Any mix of :class:`GJSBound`, :class:`KLBound`, :class:`GJSOrder` and
        :class:`KLOrder` referring to variables by index.
    config
        Solver resolution; :data:`DEFAULT_CONFIG` when omitted.
    seeds
        Extra starting tuples (one law per variable) refined alongside the
        lattice seeds, e.g. a known feasible witness.

    Returns
    -------
    Solution
        ``value`` is ``inf`` when no feasible point was found.
    """
    cfg = config or DEFAULT_CONFIG
    P, w, d = _validate(targets, weights, constraints)
    prob = _normalise(P, w, d, constraints)
    if prob is None:
        return Solution(math.inf, (), True, "constraint set is empty")
    _check_refs(prob)
    zero = _targets_if_feasible(prob)
    if zero is not None:
        return _pack(prob, zero, 0.0, True, "targets feasible")

    lattice_seeds, n_feasible = _lattice_seeds(prob, cfg)
    refiner = _Refiner(prob)
    extra = []
    for s in seeds:
        arrs = [np.asarray(as_probs(q), dtype=float) for q in s]
        if len(arrs) != len(P):
            raise DivergenceError("each seed needs one law per variable")
        grouped = []
        for g, grp in enumerate(prob.groups):
            q = grp.pinned if grp.pinned is not None else arrs[grp.members[0]] * grp.support
            grouped.append(q / q.sum() if q.sum() > 0 else grp.support / grp.support.sum())
        extra.append(grouped)

    best = (math.inf, None, False)
    for seed in lattice_seeds + extra:
        # the seed itself is a legitimate candidate
        cands = []
        if np.all(_slacks(prob, seed) >= -FEAS_TOL):
            cands.append((list(seed), True))
        x, ok = refiner.run(seed, cfg)
        Qs, _ = refiner.decode(x)
        cands.append(([q.copy() for q in Qs], ok))
        for Qs, ok in cands:
            if prob.constraints and np.min(_slacks(prob, Qs)) < -FEAS_TOL:
                continue
            v = _objective(prob, Qs)
            if v < best[0]:
                best = (v, Qs, ok)

    if best[1] is None:
        note = "no feasible point found" if n_feasible == 0 else "refinement lost feasibility"
        return Solution(math.inf, (), n_feasible == 0, note)
    return _pack(prob, best[1], max(best[0], 0.0), best[2], "")
