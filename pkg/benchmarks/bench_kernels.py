"""Time the numba and numpy kernel backends against each other.

    python benchmarks/bench_kernels.py [--aps 100] [--users 40] [--draws 500]

Also runs one full Monte Carlo snapshot per backend so the kernel share of
the total can be seen.
"""

import argparse
import time
from timeit import repeat

import numpy as np

from cfmimo import kernels
from cfmimo.config import resolve_config
from cfmimo.montecarlo import make_snapshot, mc_effective_gains


def best_of(fn, number=3, rounds=5):
    return min(repeat(fn, number=number, repeat=rounds)) / number


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--aps", type=int, default=100)
    ap.add_argument("--users", type=int, default=40)
    ap.add_argument("--draws", type=int, default=500)
    ap.add_argument("--fadings", type=int, default=5000)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    shape = (args.draws, args.aps, args.users)
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    pts_a = rng.uniform(0, 1000, (args.aps, 2))
    pts_b = rng.uniform(0, 1000, (args.users, 2))

    cfg = resolve_config(overrides={"num_aps": args.aps, "num_users": args.users})
    snap = make_snapshot(cfg, np.random.default_rng(1))
    alloc = snap.allocation("normalized")

    backends = ["numpy"] + (["numba"] if kernels.HAS_NUMBA else [])
    results = {}
    for name in backends:
        kernels.use_backend(name)
        kernels.gain_moments(g[:2], w[:2])  # compile / warm up
        kernels.wrap_distances(pts_a, pts_b, 1000.0)
        mc_effective_gains(snap, alloc, 10, base_seed=0)
        t_moments = best_of(lambda: kernels.gain_moments(g, w))
        t_wrap = best_of(lambda: kernels.wrap_distances(pts_a, pts_b, 1000.0), number=100)
        t0 = time.perf_counter()
        est = mc_effective_gains(snap, alloc, args.fadings, base_seed=0)
        t_snap = time.perf_counter() - t0
        results[name] = (t_moments, t_wrap, t_snap, est.rate)
        print(f"{name:>6}: gain_moments {t_moments * 1e3:8.2f} ms  "
              f"wrap_distances {t_wrap * 1e6:8.1f} us  "
              f"snapshot MC ({args.fadings} fadings) {t_snap:6.2f} s")

    if len(results) == 2:
        a, b = results["numpy"], results["numba"]
        print(f"speedup numba/numpy: gain_moments x{a[0] / b[0]:.2f}, "
              f"wrap_distances x{a[1] / b[1]:.2f}, snapshot x{a[2] / b[2]:.2f}")
        print(f"max |rate difference| between backends: {np.max(np.abs(a[3] - b[3])):.3e}")


if __name__ == "__main__":
    main()
