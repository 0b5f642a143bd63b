"""Hot numeric kernels, each in an ``@njit`` loop form and a numpy form.

The public names at the bottom are bound to one or the other through
:func:`exponent_lab._accel.pick`. ``benchmarks/bench_kernels.py`` imports the
``*_numba`` / ``*_numpy`` variants directly.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from ._accel import njit, pick

# constraint kinds understood by the lattice scan; idx[v] is the lattice index
# of variable v, every variable may carry its own lattice (padded to Lmax)
KIND_VEC_LE = 0  # vecs[m1, idx[a]] <= bound
KIND_MAT_LE = 1  # mats[m1, idx[a], idx[b]] <= bound
KIND_MAT_ORDER = 2  # mats[m1, idx[a], idx[c]] <= mats[m2, idx[b], idx[c]]
KIND_VEC_ORDER = 3  # vecs[m1, idx[a]] <= vecs[m2, idx[a]]


@lru_cache(maxsize=64)
def simplex_lattice(d: int, m: int) -> np.ndarray:
    """All points of the simplex in R^d whose coordinates are multiples of 1/m."""
    pts = []
    for bars in itertools.combinations(range(m + d - 1), d - 1):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(m + d - 2 - prev)
        pts.append(row)
    out = np.asarray(pts, dtype=float) / m
    out.setflags(write=False)
    return out


def lattice_size(d: int, m: int) -> int:
    from math import comb

    return comb(m + d - 1, d - 1)


def kl_rows(Q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """D(Q[r] || p) for every row r; inf where the support is not dominated."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(Q > 0, Q * np.log(Q / p), 0.0)
    return t.sum(axis=-1)


def gjs_matrix(A: np.ndarray, B: np.ndarray, alpha: float) -> np.ndarray:
    """GJS(A[a], B[b], alpha) for every pair of rows."""
    a = A[:, None, :]
    b = B[None, :, :]
    m = (alpha * a + b) / (1.0 + alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = np.where(a > 0, a * np.log(a / m), 0.0)
        tb = np.where(b > 0, b * np.log(b / m), 0.0)
    return alpha * ta.sum(-1) + tb.sum(-1)


# ---------------------------------------------------------------------------
# lattice top-k scan
# ---------------------------------------------------------------------------


@njit
def _insert(vals, idxs, v, i):
    k = vals.shape[0]
    if not v < vals[k - 1]:
        return
    pos = k - 1
    while pos > 0 and vals[pos - 1] > v:
        vals[pos] = vals[pos - 1]
        idxs[pos] = idxs[pos - 1]
        pos -= 1
    vals[pos] = v
    idxs[pos] = i


@njit
def lattice_topk_numba(obj, sizes, kinds, ia, ib, ic, m1, m2, bounds, mats, vecs, k):
    T = obj.shape[0]
    C = kinds.shape[0]
    total = 1
    for t in range(T):
        total *= sizes[t]
    best_val = np.full(k, np.inf)
    best_idx = np.full(k, -1, np.int64)
    viol_val = np.full(k, np.inf)
    viol_idx = np.full(k, -1, np.int64)
    idx = np.zeros(T, np.int64)
    for flat in range(total):
        rem = flat
        for t in range(T - 1, -1, -1):
            idx[t] = rem % sizes[t]
            rem //= sizes[t]
        worst = 0.0
        for c in range(C):
            kind = kinds[c]
            if kind == 0:
                s = bounds[c] - vecs[m1[c], idx[ia[c]]]
            elif kind == 1:
                s = bounds[c] - mats[m1[c], idx[ia[c]], idx[ib[c]]]
            elif kind == 2:
                s = mats[m2[c], idx[ib[c]], idx[ic[c]]] - mats[m1[c], idx[ia[c]], idx[ic[c]]]
            else:
                s = vecs[m2[c], idx[ia[c]]] - vecs[m1[c], idx[ia[c]]]
            if -s > worst:
                worst = -s
        if worst <= 0.0:
            v = 0.0
            for t in range(T):
                v += obj[t, idx[t]]
            _insert(best_val, best_idx, v, flat)
        else:
            _insert(viol_val, viol_idx, worst, flat)
    return best_idx, best_val, viol_idx, viol_val


def lattice_topk_numpy(obj, sizes, kinds, ia, ib, ic, m1, m2, bounds, mats, vecs, k, chunk=1 << 18):
    T = obj.shape[0]
    shape = tuple(int(x) for x in sizes)
    total = int(np.prod(shape))
    best = (np.empty(0, np.int64), np.empty(0))
    viol = (np.empty(0, np.int64), np.empty(0))
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total), dtype=np.int64)
        idx = np.unravel_index(flat, shape)
        worst = np.zeros(flat.size)
        for c in range(kinds.shape[0]):
            kind = kinds[c]
            if kind == KIND_VEC_LE:
                s = bounds[c] - vecs[m1[c]][idx[ia[c]]]
            elif kind == KIND_MAT_LE:
                s = bounds[c] - mats[m1[c]][idx[ia[c]], idx[ib[c]]]
            elif kind == KIND_MAT_ORDER:
                s = mats[m2[c]][idx[ib[c]], idx[ic[c]]] - mats[m1[c]][idx[ia[c]], idx[ic[c]]]
            else:
                s = vecs[m2[c]][idx[ia[c]]] - vecs[m1[c]][idx[ia[c]]]
            worst = np.maximum(worst, -s)
        ok = worst <= 0.0
        val = np.zeros(flat.size)
        for t in range(T):
            val += obj[t][idx[t]]
        best = _merge_topk(best, flat[ok], val[ok], k)
        viol = _merge_topk(viol, flat[~ok], worst[~ok], k)
    return _pad(best, k) + _pad(viol, k)


def _merge_topk(cur, idx, val, k):
    all_idx = np.concatenate([cur[0], idx])
    all_val = np.concatenate([cur[1], val])
    if all_val.size > k:
        part = np.argpartition(all_val, k - 1)[:k]
        all_idx, all_val = all_idx[part], all_val[part]
    order = np.argsort(all_val, kind="stable")
    return all_idx[order], all_val[order]


def _pad(pair, k):
    idx, val = pair
    n = k - idx.size
    if n > 0:
        idx = np.concatenate([idx, np.full(n, -1, np.int64)])
        val = np.concatenate([val, np.full(n, np.inf)])
    return idx, val


lattice_topk = pick(lattice_topk_numba, lattice_topk_numpy)


# ---------------------------------------------------------------------------
# integer lengths
# ---------------------------------------------------------------------------


@njit
def ceil_len(x):
    """``ceil(x)`` that ignores float noise such as ``0.3 * 10 = 3.0000000000000004``."""
    return int(np.ceil(x - 1e-9 * max(1.0, abs(x))))


# ---------------------------------------------------------------------------
# scores of count vectors
# ---------------------------------------------------------------------------


@njit
def _gjs_counts(x, N, y, n, alpha):
    # same log1p form as divergence.gjs
    w = alpha / (1.0 + alpha)
    v = 1.0 - w
    s1 = 0.0
    s2 = 0.0
    for a in range(x.shape[0]):
        p = x[a] / N
        q = y[a] / n
        if p > 0:
            s1 -= p * np.log1p(v * (q / p - 1.0))
        if q > 0:
            s2 -= q * np.log1p(w * (p / q - 1.0))
    return alpha * s1 + s2


@njit
def gjs_scores_numba(train, N, test, n, alpha):
    B, M, d = train.shape
    out = np.empty((B, M))
    for b in range(B):
        for i in range(M):
            out[b, i] = _gjs_counts(train[b, i], N, test[b], n, alpha)
    return out


def gjs_scores_numpy(train, N, test, n, alpha):
    w = alpha / (1.0 + alpha)
    v = 1.0 - w
    p = np.asarray(train, float) / N
    q = (np.asarray(test, float) / n)[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(p > 0, -p * np.log1p(v * (q / p - 1.0)), 0.0)
        t2 = np.where(q > 0, -q * np.log1p(w * (p / q - 1.0)), 0.0)
    return alpha * t1.sum(-1) + t2.sum(-1)


@njit
def kl_scores_numba(test, n, logP):
    B, d = test.shape
    M = logP.shape[0]
    out = np.empty((B, M))
    for b in range(B):
        for i in range(M):
            s = 0.0
            for a in range(d):
                if test[b, a] > 0:
                    q = test[b, a] / n
                    s += q * (np.log(q) - logP[i, a])
            out[b, i] = s
    return out


def kl_scores_numpy(test, n, logP):
    q = np.asarray(test, float) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(q[:, None, :] > 0, q[:, None, :] * (np.log(q)[:, None, :] - logP[None, :, :]), 0.0)
    return t.sum(-1)


# ---------------------------------------------------------------------------
# decision rules; kinds share codes with montecarlo.TEST_KINDS
# ---------------------------------------------------------------------------

KIND_TWO_PHASE = 0  # nearest-neighbour two-phase classification
KIND_GUTMAN = 1  # fixed-length test with reject
KIND_THRESHOLD = 2  # threshold-based binary two-phase test (phase 2 scored at alpha / k)
KIND_TWO_PHASE_HT = 3  # two-phase test with known laws
REJECT = -1


@njit
def _argmin_low(s):
    best = 0
    for i in range(1, s.shape[0]):
        if s[i] < s[best]:
            best = i
    return best


@njit
def phase1_rule(kind, s, lambdas):
    """Return ``(stop, decision)`` from the phase-1 scores."""
    M = s.shape[0]
    if kind == 0 or kind == 3:
        i_star = _argmin_low(s)
        stop = True
        for i in range(M):
            if i != i_star:
                if kind == 0:
                    if not s[i] >= lambdas[i]:
                        stop = False
                else:
                    if not s[i] > lambdas[i]:
                        stop = False
        return stop, i_star
    if kind == 1:
        lam = lambdas[0]
        ok = True
        for i in range(1, M):
            if not s[i] >= lam:
                ok = False
        if ok:
            return True, 0
        below = 0
        which = -1
        for i in range(M):
            if s[i] < lam:
                below += 1
                which = i
        if below == 1:
            return True, which
        return True, -1
    # threshold-based binary test
    stop = False
    for i in range(M):
        if s[i] > lambdas[i]:
            stop = True
    return stop, 0 if s[0] <= lambdas[0] else 1


@njit
def phase2_rule(kind, s, lam):
    if kind == 2:
        return 0 if s[0] <= lam else 1
    return _argmin_low(s)


@njit
def decide_batch_numba(kind, s1, s2, lambdas, lam):
    B = s1.shape[0]
    dec = np.empty(B, np.int64)
    phase2 = np.zeros(B, np.bool_)
    for b in range(B):
        stop, d1 = phase1_rule(kind, s1[b], lambdas)
        if stop:
            dec[b] = d1
        else:
            phase2[b] = True
            dec[b] = phase2_rule(kind, s2[b], lam)
    return dec, phase2


def decide_batch_numpy(kind, s1, s2, lambdas, lam):
    s1 = np.asarray(s1, float)
    B, M = s1.shape
    rows = np.arange(B)
    lambdas = np.asarray(lambdas, float)
    if kind in (KIND_TWO_PHASE, KIND_TWO_PHASE_HT):
        i_star = np.argmin(s1, axis=1)  # first minimum wins
        ok = s1 >= lambdas[None, :] if kind == KIND_TWO_PHASE else s1 > lambdas[None, :]
        ok[rows, i_star] = True
        stop = ok.all(axis=1)
        d1 = i_star
    elif kind == KIND_GUTMAN:
        lam0 = lambdas[0]
        below = s1 < lam0
        first = ~below[:, 1:].any(axis=1)
        one = below.sum(axis=1) == 1
        d1 = np.where(first, 0, np.where(one, np.argmax(below, axis=1), REJECT))
        stop = np.ones(B, bool)
    else:
        stop = (s1 > lambdas[None, :]).any(axis=1)
        d1 = np.where(s1[:, 0] <= lambdas[0], 0, 1)
    phase2 = ~stop
    if kind == KIND_THRESHOLD:
        d2 = np.where(np.asarray(s2)[:, 0] <= lam, 0, 1)
    else:
        d2 = np.argmin(s2, axis=1) if phase2.any() else np.zeros(B, np.int64)
    return np.where(stop, d1, d2).astype(np.int64), phase2


# ---------------------------------------------------------------------------
# sequential test on pre-drawn uniforms
# ---------------------------------------------------------------------------

SEQ_RUNNING = 0
SEQ_STOPPED = 1
SEQ_FULL_PSI = 2  # stopped with every score above threshold
SEQ_TRUNCATED = 3


@njit
def g_threshold_nb(beta, n, alpha, d):
    return (
        -np.log(beta * (d - 1)) / n
        + 2.0 * d * np.log(n + 1.0) / n
        + d * np.log(n * alpha + 1.0) / n
    )


@njit
def _draw(cdf, u):
    d = cdf.shape[0]
    for a in range(d - 1):
        if u < cdf[a]:
            return a
    return d - 1


@njit
def sequential_run_numba(U, train_cdf, test_cdf, alpha, beta, max_steps, train, test, steps, ntrain, status, tau, dec):
    """Advance every running trial through the step slab ``U`` (B, S, slots)."""
    B, S, slots = U.shape
    M, d = train_cdf.shape
    dmax = (slots - 1) // M
    for b in range(B):
        if status[b] != SEQ_RUNNING:
            continue
        for s in range(S):
            k = steps[b] + 1
            Nk = ceil_len(alpha * k)
            delta = Nk - ntrain[b]
            test[b, _draw(test_cdf, U[b, s, 0])] += 1
            for i in range(M):
                for r in range(delta):
                    train[b, i, _draw(train_cdf[i], U[b, s, 1 + i * dmax + r])] += 1
            steps[b] = k
            ntrain[b] = Nk
            g = g_threshold_nb(beta, k, alpha, d)
            n_psi = 0
            out = -1
            for i in range(M):
                if _gjs_counts(train[b, i], Nk, test[b], k, alpha) > g:
                    n_psi += 1
                else:
                    out = i
            if n_psi >= M - 1:
                tau[b] = k
                if n_psi == M - 1:
                    status[b] = SEQ_STOPPED
                    dec[b] = out
                else:
                    status[b] = SEQ_FULL_PSI
                    sc = np.empty(M)
                    for i in range(M):
                        sc[i] = _gjs_counts(train[b, i], Nk, test[b], k, alpha)
                    dec[b] = _argmin_low(sc)
                break
            if k >= max_steps:
                status[b] = SEQ_TRUNCATED
                tau[b] = k
                break


def sequential_run_numpy(U, train_cdf, test_cdf, alpha, beta, max_steps, train, test, steps, ntrain, status, tau, dec):
    B, S, slots = U.shape
    M, d = train_cdf.shape
    dmax = (slots - 1) // M
    for s in range(S):
        act = np.flatnonzero(status == SEQ_RUNNING)
        if act.size == 0:
            return
        k = steps[act] + 1
        Nk = np.array([ceil_len(alpha * kk) for kk in k])
        delta = Nk - ntrain[act]
        ys = np.minimum(np.searchsorted(test_cdf[:-1], U[act, s, 0], side="right"), d - 1)
        np.add.at(test, (act, ys), 1)
        for i in range(M):
            for r in range(int(delta.max(initial=0))):
                live = act[delta > r]
                xs = np.searchsorted(train_cdf[i][:-1], U[live, s, 1 + i * dmax + r], side="right")
                np.add.at(train, (live, np.full(live.size, i), xs), 1)
        steps[act] = k
        ntrain[act] = Nk
        sc = np.stack(
            [gjs_scores_numpy(train[a : a + 1], Nk[t], test[a : a + 1], k[t], alpha)[0] for t, a in enumerate(act)]
        )
        g = np.array([g_threshold_nb(beta, kk, alpha, d) for kk in k])
        psi = sc > g[:, None]
        n_psi = psi.sum(axis=1)
        fin = n_psi >= M - 1
        for t in np.flatnonzero(fin):
            a = act[t]
            tau[a] = k[t]
            if n_psi[t] == M - 1:
                status[a] = SEQ_STOPPED
                dec[a] = int(np.flatnonzero(~psi[t])[0])
            else:
                status[a] = SEQ_FULL_PSI
                dec[a] = int(np.argmin(sc[t]))
        trunc = (~fin) & (k >= max_steps)
        status[act[trunc]] = SEQ_TRUNCATED
        tau[act[trunc]] = k[trunc]


# ---------------------------------------------------------------------------
# exact enumeration over joint types
# ---------------------------------------------------------------------------


@njit
def exact_sum_numba(kind, S1, S2, tot_idx, lp_train, lp_test, lp_cont, lambdas, lam, truth):
    """Sum type-class probabilities of every error / second-phase / reject event.

    ``S1[i, a, t]`` is the phase-1 score of source ``i`` with training type
    ``a`` against test type ``t``; ``S2[i, a, u]`` the phase-2 score against
    the pooled type ``u = tot_idx[t, c]``. ``lp_*`` are log type-class
    probabilities (training per source; test and continuation under the
    true law).
    """
    M, LN, Ln = S1.shape
    Lc = lp_cont.shape[0]
    err = 0.0
    excess = 0.0
    reject = 0.0
    mass = 0.0
    idx = np.zeros(M, np.int64)
    s = np.empty(M)
    s2 = np.empty(M)
    total = 1
    for i in range(M):
        total *= LN
    for flat in range(total):
        rem = flat
        lpa = 0.0
        for i in range(M - 1, -1, -1):
            idx[i] = rem % LN
            rem //= LN
            lpa += lp_train[i, idx[i]]
        if lpa == -np.inf:
            continue
        for t in range(Ln):
            lpt = lpa + lp_test[t]
            if lpt == -np.inf:
                continue
            pt = np.exp(lpt)
            for i in range(M):
                s[i] = S1[i, idx[i], t]
            stop, d1 = phase1_rule(kind, s, lambdas)
            if stop:
                mass += pt
                if d1 == -1:
                    reject += pt
                elif d1 != truth:
                    err += pt
                continue
            excess += pt
            for c in range(Lc):
                if lp_cont[c] == -np.inf:
                    continue
                pc = np.exp(lpt + lp_cont[c])
                mass += pc
                u = tot_idx[t, c]
                for i in range(M):
                    s2[i] = S2[i, idx[i], u]
                if phase2_rule(kind, s2, lam) != truth:
                    err += pc
    return err, excess, reject, mass


def exact_sum_numpy(kind, S1, S2, tot_idx, lp_train, lp_test, lp_cont, lambdas, lam, truth):
    M, LN, Ln = S1.shape
    err = excess = reject = mass = 0.0
    p_test = np.exp(lp_test)
    p_cont = np.exp(lp_cont)
    for combo in itertools.product(range(LN), repeat=M):
        pa = float(np.exp(sum(lp_train[i, combo[i]] for i in range(M))))
        if pa == 0.0:
            continue
        s1 = np.stack([S1[i, combo[i], :] for i in range(M)], axis=1)  # (Ln, M)
        s2_all = np.stack([S2[i, combo[i], :] for i in range(M)], axis=1)  # (Ltot, M)
        s2 = s2_all[tot_idx.reshape(-1)]  # (Ln * Lc, M)
        dec1, ph2 = decide_batch_numpy(kind, s1, np.zeros_like(s1), lambdas, lam)
        pt = pa * p_test
        stop = ~ph2
        mass += float(pt[stop].sum())
        reject += float(pt[stop & (dec1 == REJECT)].sum())
        err += float(pt[stop & (dec1 != REJECT) & (dec1 != truth)].sum())
        if ph2.any():
            excess += float(pt[ph2].sum())
            if kind == KIND_THRESHOLD:
                d2 = np.where(s2[:, 0] <= lam, 0, 1)
            else:
                d2 = np.argmin(s2, axis=1)
            d2 = d2.reshape(Ln, -1)
            pc = pt[:, None] * p_cont[None, :]
            mass += float(pc[ph2].sum())
            err += float((pc * (d2 != truth))[ph2].sum())
    return err, excess, reject, mass


gjs_scores = pick(gjs_scores_numba, gjs_scores_numpy)
kl_scores = pick(kl_scores_numba, kl_scores_numpy)
decide_batch = pick(decide_batch_numba, decide_batch_numpy)
sequential_run = pick(sequential_run_numba, sequential_run_numpy)
exact_sum = pick(exact_sum_numba, exact_sum_numpy)
