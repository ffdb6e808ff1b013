"""Compare the compiled and pure-Python kernels on the two hot loops.

    python3 benchmarks/bench_kernels.py [--states 18] [--steps 100000] [--repeat 3]

Prints one line per kernel and backend with the best wall time, and checks
that both backends return identical results.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from mcgeo import kernels
from mcgeo.random_chains import stationary_instance
from mcgeo.state import ProductStateSpace
from mcgeo.swapping import SwapConfig, simulate_projection_sampler


def best_time(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--states", type=int, default=18, help="Cheeger scan size (<= 22)")
    ap.add_argument("--steps", type=int, default=100_000, help="sampler steps")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    impls = kernels.backends()
    print(f"default backend: {kernels.BACKEND}; available: {', '.join(sorted(impls))}")

    p, pi = stationary_instance(ProductStateSpace((args.states,)), 0, product=False)
    w = np.ascontiguousarray(pi.mass[:, None] * p.rows)
    mass = np.ascontiguousarray(pi.mass)
    cheeger = {}
    for name, impl in sorted(impls.items()):
        cheeger[name], t = best_time(lambda: impl.cheeger_scan(w, mass), args.repeat)
        print(f"cheeger_scan  {name:7s} n={args.states:2d}  {t * 1e3:10.2f} ms  value={cheeger[name][0]:.15g}")

    h = np.random.Generator(np.random.Philox(1)).random(8) * 2.0
    cfg = SwapConfig.hypercube(3, h, (0.0, 1.0))
    runs = {}
    for name, impl in sorted(impls.items()):
        runs[name], t = best_time(
            lambda: simulate_projection_sampler(cfg, 7, args.steps, backend=impl), args.repeat)
        print(f"sampler       {name:7s} steps={args.steps}  {t * 1e3:10.2f} ms  ({args.steps / t:,.0f} steps/s)")

    if len(impls) > 1:
        vals = [v[0] for v in cheeger.values()]
        same_cheeger = max(vals) - min(vals) <= 1e-12 * max(1.0, abs(vals[0]))
        counts = [r.counts for r in runs.values()]
        same_runs = all(np.array_equal(counts[0], c) for c in counts[1:])
        print(f"cheeger values agree: {same_cheeger}; sampler counts identical: {same_runs}")
        return 0 if same_cheeger and same_runs else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
