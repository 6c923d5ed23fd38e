"""Numba vs pure-numpy channel kernels.

    python3 benchmarks/bench_kernels.py [--n 1000000] [--repeat 20]

Runs both paths in this process (the env flag only picks the default), checks
they agree, and prints the best wall time of each.
"""
import argparse
import time

import numpy as np

from vtlsim import kernels

ARGS = (500.0, 600.0, 700.0, 0.98, 0.10)


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    sums = rng.uniform(0, 800, args.n)
    uniforms = rng.random(args.n)

    if not kernels.USING_NUMBA:
        print("numba unavailable or disabled (VTLSIM_DISABLE_NUMBA); numpy path only")
    cases = {
        "delivery_probability": (
            lambda: kernels.delivery_probability_np(sums, *ARGS),
            lambda: kernels.delivery_probability_vec(sums, *ARGS),
        ),
        "gap_stats": (
            lambda: kernels.gap_stats_np(uniforms, 0.1),
            lambda: kernels.gap_stats(uniforms, 0.1),
        ),
    }
    print(f"n={args.n} repeat={args.repeat} numba={'on' if kernels.USING_NUMBA else 'off'}")
    for name, (np_fn, fast_fn) in cases.items():
        ref, got = np_fn(), fast_fn()  # first call also pays JIT compilation
        same = np.array_equal(np.asarray(ref, dtype=float), np.asarray(got, dtype=float),
                              equal_nan=True)
        t_np = best_of(np_fn, args.repeat)
        t_fast = best_of(fast_fn, args.repeat)
        print(f"{name:22s} numpy {t_np * 1e3:8.3f} ms  default {t_fast * 1e3:8.3f} ms  "
              f"speedup {t_np / t_fast:5.2f}x  identical={same}")


if __name__ == "__main__":
    main()
