"""Compare compiled (numba) and vectorized (numpy) kernels.

Usage: python benchmarks/bench_kernels.py [--nodes N] [--repeat R]

Each row times one kernel on identical inputs and checks the two outputs
agree.  Without numba installed only the numpy column is reported.
"""
import argparse
import time

import numpy as np

from feedcontagion import kernels
from feedcontagion._accel import HAS_NUMBA
from feedcontagion.graph import configuration_model, power_law_degrees
from feedcontagion.percolation import from_graph


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, float), np.asarray(b, float), rtol=1e-9, atol=1e-12)


def cases(n, rng):
    g = configuration_model(power_law_degrees(n, 2.3, rng, k_min=2), seed=rng)
    ptr, idx = g.followers_ptr, g.followers_idx
    coins = rng.random(idx.size)
    node_coins = rng.random(n)
    seeds = np.array([int(np.argmax(g.in_degree()))], np.int64)
    fc = g.out_degree().astype(np.int64)
    coef = from_graph(g).g1_coefficients()
    w = (1 + np.arange(100) / 15.0) ** -1.0
    u = rng.random((20000, 100))
    return [
        ("icm_spread", "icm_spread_nb", "icm_spread_np", (ptr, idx, coins, 0.5, seeds, 10**9)),
        ("fsm_spread", "fsm_spread_nb", "fsm_spread_np", (ptr, idx, node_coins, 0.5, seeds, 10**9)),
        ("threshold_spread", "threshold_spread_nb", "threshold_spread_np", (ptr, idx, fc, 0.05, seeds, 10**9)),
        ("fixed_point", "fixed_point_nb", "fixed_point_np", (coef, 0.6, 1e-12, 100000)),
        ("weighted_topk_counts", "weighted_topk_counts_nb", "weighted_topk_counts_np", (w, u, 5)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    rng = np.random.default_rng(a.seed)
    print(f"numba: {'on' if HAS_NUMBA else 'off'}  nodes: {a.nodes}  repeat: {a.repeat}")
    print(f"{'kernel':<22}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}  match")
    for name, nb, npf, args in cases(a.nodes, rng):
        t_np, r_np = best_of(lambda: getattr(kernels, npf)(*args), a.repeat)
        if HAS_NUMBA:
            getattr(kernels, nb)(*args)  # compile outside the timed runs
            t_nb, r_nb = best_of(lambda: getattr(kernels, nb)(*args), a.repeat)
            print(f"{name:<22}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>10.1f}  {same(r_np, r_nb)}")
        else:
            print(f"{name:<22}{t_np * 1e3:>12.2f}{'-':>12}{'-':>10}  -")


if __name__ == "__main__":
    main()
