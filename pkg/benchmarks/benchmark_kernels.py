#!/usr/bin/env python3
"""Timing comparison of the compiled kernels against the NumPy fallback.

The two implementations share one draw-order contract, so besides speed the
script also cross-checks that a common seed yields identical output.

    python benchmarks/benchmark_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from brbm._backend import get_kernels


def make_gen(seed):
    return np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))


def timeit(fn, repeats=3):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    try:
        cy = get_kernels("cython")
    except ImportError:
        print("compiled extension not available; build it first (pip install -e .)")
        return 1
    py = get_kernels("python")

    horizon = 10.0 if args.quick else 12.0
    census_t = 6.0 if args.quick else 8.0
    n_paths = 10**5 if args.quick else 4 * 10**5

    rows = []

    def bench(name, call, check_equal=True):
        t_cy, out_cy = timeit(lambda: call(cy))
        t_py, out_py = timeit(lambda: call(py))
        if check_equal:
            flat_cy = np.concatenate([np.ravel(np.asarray(o, dtype=float)) for o in out_cy])
            flat_py = np.concatenate([np.ravel(np.asarray(o, dtype=float)) for o in out_py])
            agree = np.allclose(flat_cy, flat_py, rtol=1e-12, atol=0)
        else:
            agree = True
        rows.append((name, t_cy, t_py, t_py / t_cy, agree))

    bench(
        f"simulate tree (t={horizon:g}, ~{np.exp(horizon):,.0f} leaves)",
        lambda k: k.simulate_waves(make_gen(1), np.array([0.0]), np.array([0.0]), horizon, 10**7),
    )

    n_rep = 200 if args.quick else 500

    def many(k):
        acc = 0.0
        for r in range(n_rep):
            out = k.simulate_waves(
                np.random.Generator(np.random.Philox(key=np.array([7, r], dtype=np.uint64))),
                np.array([0.0]),
                np.array([0.0]),
                6.0,
                10**7,
            )
            acc += out[4][-1]
        return (np.array([acc]),)

    bench(f"simulate {n_rep} replicates (t=6)", many)

    slopes = np.array([1.14, 1.14])
    offsets = np.array([1.0, 1.0])
    curved = np.array([0, 1], dtype=np.uint8)
    box_lo = np.array([census_t * 1.14 - 1.0] * 2)
    box_hi = np.array([census_t * 1.14, census_t * 1.14])
    bench(
        f"barrier census (t={census_t:g}, dt=1e-2, 2 barriers, both sides)",
        lambda k: k.census_waves(
            make_gen(2), census_t, 1e-2, slopes, offsets, curved, box_lo, box_hi, True, 10**7
        ),
    )

    bench(
        f"first-passage paths (n={n_paths:,}, 1000 steps)",
        lambda k: k.fpt_paths(make_gen(3), 1.0, 1.0, 1.0, 1e-3, n_paths),
    )

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'cython':>9}  {'numpy':>9}  {'speedup':>8}  outputs")
    for name, t_cy, t_py, speedup, agree in rows:
        print(
            f"{name:<{width}}  {t_cy:>8.3f}s  {t_py:>8.3f}s  {speedup:>7.1f}x  "
            f"{'identical' if agree else 'DIFFER'}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
