"""Benchmark the jitted hot kernels against their pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--n 48] [--repeats 3]

The same dispatch is controlled at import time by RSCAT_DISABLE_JIT; here
both implementations are timed explicitly in one process.
"""

import argparse
import time

import numpy as np

from rscat import _kernels
from rscat.fields import GridSpec


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=48, help="grid cells per axis")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    n = args.n
    grid = GridSpec.centered(64 if n > 64 else max(8, 1 << (n - 1).bit_length()), 2.0 / n)
    rng = np.random.default_rng(0)
    g = rng.standard_normal((n, n, n)) + 1j * rng.standard_normal((n, n, n))
    mu = np.abs(rng.standard_normal((n, n, n)))
    xs = ys = zs = np.linspace(-1.0, 1.0, n)
    kd = 7.0 * np.array([0.6, 0.64, 0.48])
    point = np.array([3.0, 0.5, -0.25])
    padded = (2 * n, 2 * n, 2 * n)
    h = 2.0 / n
    self_val = complex(1e-4, 1e-6)

    cases = [
        ("kernel_block  (padded %d^3)" % (2 * n),
         lambda: _kernels.kernel_block_numpy(padded, h, 5.0, self_val),
         lambda: _kernels._kernel_block_nb(*padded, h, 5.0, h ** 3,
                                           self_val.real, self_val.imag)),
        ("farfield_sum  (%d^3)" % n,
         lambda: _kernels.farfield_sum_numpy(g, xs, ys, zs, kd),
         lambda: _kernels._farfield_sum_nb(np.ascontiguousarray(g.real),
                                           np.ascontiguousarray(g.imag),
                                           xs, ys, zs, *kd)),
        ("green_point   (%d^3)" % n,
         lambda: _kernels.green_point_sum_numpy(g, xs, ys, zs, 5.0, point),
         lambda: _kernels._green_point_sum_nb(np.ascontiguousarray(g.real),
                                              np.ascontiguousarray(g.imag),
                                              xs, ys, zs, 5.0, *point)),
        ("newtonian_sum (%d^3)" % n,
         lambda: _kernels.newtonian_sum_numpy(mu, xs, ys, zs, point),
         lambda: _kernels._newtonian_sum_nb(mu, xs, ys, zs, *point)),
    ]

    if not _kernels.HAS_NUMBA:
        print("numba is not importable: timing the numpy path only")

    print(f"{'kernel':<28} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, np_fn, nb_fn in cases:
        t_np, _ = _time(np_fn, args.repeats)
        if _kernels.HAS_NUMBA:
            nb_fn()  # compile outside the timed region
            t_nb, _ = _time(nb_fn, args.repeats)
            print(f"{name:<28} {t_np * 1e3:>8.1f}ms {t_nb * 1e3:>8.1f}ms {t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<28} {t_np * 1e3:>8.1f}ms {'-':>10} {'-':>9}")


if __name__ == "__main__":
    main()
