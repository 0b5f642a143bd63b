"""Compare the numba kernels with their numpy fallbacks.

Kernel timings call both implementations in one process. End-to-end timings
run each path in a fresh interpreter with ``EXPONENT_LAB_DISABLE_NUMBA`` set
or unset, so module-level dispatch is exercised as users see it.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--skip-e2e]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from exponent_lab import kernels

E2E = {
    "run_sim two-phase M=3 n=400 4096 trials": (
        "from exponent_lab import ProblemInstance\n"
        "from exponent_lab.montecarlo import SimPlan, run_sim\n"
        "inst = ProblemInstance(([0.38,0.31,0.31],[0.31,0.38,0.31],[0.31,0.31,0.38]), alpha=8.0, k=3.0)\n"
        "run_sim(SimPlan(inst, 'two-phase', 4096, 1, (400,), (0.004, 0.0008, 0.0009)))\n"
    ),
    "exact_enumerate two-phase M=2 n=24": (
        "from exponent_lab import ProblemInstance\n"
        "from exponent_lab.montecarlo import exact_enumerate\n"
        "inst = ProblemInstance(([0.7,0.3],[0.4,0.6]), alpha=1.5, k=1.5)\n"
        "exact_enumerate(inst, 'two-phase', 24, (0.03, 0.02))\n"
    ),
    "run_sequential beta=1e-3 1000 trials": (
        "from exponent_lab import ProblemInstance\n"
        "from exponent_lab.montecarlo import run_sequential\n"
        "inst = ProblemInstance(([0.8,0.2],[0.2,0.8]), alpha=1.0)\n"
        "run_sequential(inst, [1e-3], trials=1000, seed=3)\n"
    ),
}


def kernel_inputs(rng: np.random.Generator, B: int = 1 << 16, M: int = 3, d: int = 3, n: int = 400):
    P = rng.dirichlet(np.ones(d), M)
    N = 3 * n
    train = np.stack([rng.multinomial(N, P[i], B) for i in range(M)], axis=1).astype(np.int64)
    test = rng.multinomial(n, P[0], B).astype(np.int64)
    s1 = kernels.gjs_scores_numpy(train, N, test, n, 8.0)
    s2 = s1 * 0.5
    return dict(P=P, N=N, n=n, train=train, test=test, s1=s1, s2=s2, logP=np.log(P))


def bench_kernels(repeat: int) -> list[tuple[str, float, float]]:
    x = kernel_inputs(np.random.default_rng(0))
    lambdas = np.array([0.004, 0.0008, 0.0009])
    cases = {
        "gjs_scores": lambda f: f(x["train"], x["N"], x["test"], x["n"], 8.0),
        "kl_scores": lambda f: f(x["test"], x["n"], x["logP"]),
        "decide_batch": lambda f: f(kernels.KIND_TWO_PHASE, x["s1"], x["s2"], lambdas, 0.0),
    }
    rows = []
    for name, call in cases.items():
        fnb, fnp = getattr(kernels, f"{name}_numba"), getattr(kernels, f"{name}_numpy")
        call(fnb)  # compile outside the timed region
        tnb = min(timeit.repeat(lambda: call(fnb), number=1, repeat=repeat))
        tnp = min(timeit.repeat(lambda: call(fnp), number=1, repeat=repeat))
        rows.append((f"{name} (B=65536, M=3)", tnb, tnp))
    return rows


def run_fresh(code: str, disable: bool) -> float:
    env = dict(os.environ)
    env.pop("EXPONENT_LAB_DISABLE_NUMBA", None)
    if disable:
        env["EXPONENT_LAB_DISABLE_NUMBA"] = "1"
    timed = f"import time\n{code}t = time.perf_counter()\n{code}print(time.perf_counter() - t)\n"
    out = subprocess.run([sys.executable, "-c", timed], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def bench_e2e() -> list[tuple[str, float, float]]:
    # the first call in each interpreter warms caches; the second is timed
    return [(name, run_fresh(code, False), run_fresh(code, True)) for name, code in E2E.items()]


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)
    rows = bench_kernels(args.repeat)
    if not args.skip_e2e:
        rows += bench_e2e()
    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'numba s':>10}  {'numpy s':>10}  {'speed-up':>8}")
    for name, tnb, tnp in rows:
        print(f"{name:<{width}}  {tnb:>10.4f}  {tnp:>10.4f}  {tnp / tnb:>8.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
