"""Gradient-free grid oracles, independent of the package solver.

Every oracle scans simplex lattices, then zooms: a local lattice of shrinking
spacing is laid around the best point found so far. Values are upper bounds
on the true minimum that tighten with each zoom.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def kl_rows(Q, p):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(Q > 0, Q * np.log(Q / p), 0.0)
    return t.sum(-1)


def gjs_pairs(A, B, alpha):
    """GJS(A[a], B[b]) for all pairs, via the plain mixture formula."""
    a = A[:, None, :]
    b = B[None, :, :]
    m = (alpha * a + b) / (1 + alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = np.where(a > 0, a * np.log(a / m), 0.0).sum(-1)
        tb = np.where(b > 0, b * np.log(b / m), 0.0).sum(-1)
    return alpha * ta + tb


def lattice(d, m):
    """Simplex points with coordinates in multiples of 1/m."""
    pts = [c + (m - sum(c),) for c in itertools.product(range(m + 1), repeat=d - 1) if sum(c) <= m]
    return np.asarray(pts, float) / m


def local_lattice(center, h, R):
    """Points center + h z with integer z, |z_i| <= R, sum z = 0, inside the simplex."""
    d = center.size
    rng = range(-R, R + 1)
    z = np.array([c + (-sum(c),) for c in itertools.product(rng, repeat=d - 1)], float)
    pts = center[None, :] + h * z
    pts = pts[np.all(pts >= -1e-15, axis=1)]
    pts = np.clip(pts, 0, None)
    return pts / pts.sum(1, keepdims=True)


def _zoom_schedule(d):
    # (spacing, radius in steps) for successive local refinements
    if d == 2:
        return [(1e-4, 40), (1e-5, 40), (1e-6, 40), (1e-7, 40)]
    return [(2e-3, 12), (4e-4, 12), (8e-5, 12), (1.6e-5, 12), (3.2e-6, 12), (6.4e-7, 12)]


# ---------------------------------------------------------------------------
# centre + satellites: min_c [c_obj(c) + sum_s min_{q: GJS(q, c) <= r_s} s_obj(q)]
# ---------------------------------------------------------------------------


def _center_pass(C, c_obj, sats, alpha, chunk=256):
    best = (math.inf, None)
    for start in range(0, C.shape[0], chunk):
        Cc = C[start : start + chunk]
        tot = c_obj[start : start + chunk].copy()
        picks = []
        for S, s_obj, r in sats:
            G = gjs_pairs(S, Cc, alpha)  # (|S|, chunk)
            vals = np.where(G <= r, s_obj[:, None], np.inf)
            idx = np.argmin(vals, axis=0)
            tot += vals[idx, np.arange(Cc.shape[0])]
            picks.append(idx)
        c = int(np.argmin(tot))
        if tot[c] < best[0]:
            best = (float(tot[c]), (Cc[c], [S[p[c]] for (S, _, _), p in zip(sats, picks)]))
    return best


def center_satellites(center_target, center_w, sats, alpha, m0):
    """Oracle for problems where every constraint is a GJS ball around one centre.

    ``sats`` lists ``(target, weight, radius)``; the constraint of satellite
    ``s`` is ``GJS(Q_s, Q_c, alpha) <= radius``.
    """
    d = center_target.size
    L = lattice(d, m0)
    c_obj = center_w * kl_rows(L, center_target)
    S = [(L, w * kl_rows(L, t), r) for t, w, r in sats]
    val, arg = _center_pass(L, c_obj, S, alpha)
    for h, R in _zoom_schedule(d):
        if arg is None:
            break
        c0, s0 = arg
        C = local_lattice(c0, h, R)
        Sz = []
        for (t, w, r), q in zip(sats, s0):
            P = np.vstack([local_lattice(q, h, R), L])  # keep the global lattice as fallback
            Sz.append((P, w * kl_rows(P, t), r))
        C = np.vstack([C, c0[None, :]])
        v, a = _center_pass(C, center_w * kl_rows(C, center_target), Sz, alpha)
        if v <= val:
            val, arg = v, a
    return val


# ---------------------------------------------------------------------------
# order constraint: min a(Q1) + b(Q2) + c(Q3) with GJS(Q1,Q3) <= GJS(Q2,Q3)
# ---------------------------------------------------------------------------


def _order_pass(L1, a_obj, L2, b_obj, L3, c_obj, alpha):
    best_v, best_t = math.inf, -1
    G1 = gjs_pairs(L1, L3, alpha) if L1.shape[0] * L3.shape[0] <= 4e6 else None
    G2 = gjs_pairs(L2, L3, alpha) if L2.shape[0] * L3.shape[0] <= 4e6 else None
    for t in range(L3.shape[0]):
        g1 = G1[:, t] if G1 is not None else gjs_pairs(L1, L3[t : t + 1], alpha)[:, 0]
        g2 = G2[:, t] if G2 is not None else gjs_pairs(L2, L3[t : t + 1], alpha)[:, 0]
        order = np.argsort(g1, kind="stable")
        pref = np.minimum.accumulate(a_obj[order])
        pos = np.searchsorted(g1[order], g2, side="right") - 1
        tot = np.where(pos >= 0, pref[np.maximum(pos, 0)] + b_obj, np.inf)
        v = float(tot.min() + c_obj[t])
        if v < best_v:
            best_v, best_t = v, t
    if best_t < 0:
        return math.inf, None
    q3 = L3[best_t : best_t + 1]
    g1 = gjs_pairs(L1, q3, alpha)[:, 0]
    g2 = gjs_pairs(L2, q3, alpha)[:, 0]
    ok = g1[:, None] <= g2[None, :]
    tot = np.where(ok, a_obj[:, None] + b_obj[None, :], np.inf)
    i1, i2 = np.unravel_index(int(np.argmin(tot)), tot.shape)
    return best_v, (L1[i1], L2[i2], L3[best_t])


def order_oracle(targets, weights, alpha, m0):
    """Oracle for ``min sum w_t D(Q_t||P_t)`` with ``GJS(Q1,Q3) <= GJS(Q2,Q3)``."""
    d = targets[0].size
    L = lattice(d, m0)
    objs = [w * kl_rows(L, t) for t, w in zip(targets, weights)]
    val, arg = _order_pass(L, objs[0], L, objs[1], L, objs[2], alpha)
    sched = _zoom_schedule(d)
    for h, R in sched:
        Ls = [np.vstack([local_lattice(q, h, R), q[None, :]]) for q in arg]
        o = [w * kl_rows(Lz, t) for Lz, t, w in zip(Ls, targets, weights)]
        v, a = _order_pass(Ls[0], o[0], Ls[1], o[1], Ls[2], o[2], alpha)
        if v <= val:
            val, arg = v, a
    return val


# ---------------------------------------------------------------------------
# single variable
# ---------------------------------------------------------------------------


def single_oracle(objective, feasible, d, m0):
    """``min objective(Q)`` over ``feasible(Q)`` for row-batched callables."""
    L = lattice(d, m0)
    ok = feasible(L)
    if not np.any(ok):
        return math.inf
    v = np.where(ok, objective(L), np.inf)
    i = int(np.argmin(v))
    val, q = float(v[i]), L[i]
    sched = [(1e-4, 200), (1e-6, 200), (1e-8, 200)] if d == 2 else [(2e-3, 30), (1e-4, 30), (5e-6, 30), (2.5e-7, 30)]
    for h, R in sched:
        Z = np.vstack([local_lattice(q, h, R), q[None, :]])
        ok = feasible(Z)
        v = np.where(ok, objective(Z), np.inf)
        i = int(np.argmin(v))
        if v[i] <= val:
            val, q = float(v[i]), Z[i]
    return val
