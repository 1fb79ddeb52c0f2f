#!/usr/bin/env python3
"""Benchmark the fused-operator kernels: numba backend vs. numpy fallback.

Usage:
    python3 benchmarks/bench_adaln.py [--sizes 8192x5120,65536x1024] [--repeats 5]

Times forward, naive backward reduction, and the d-tile reduction in both
backends. Numba kernels are warmed up once before timing so JIT compilation
is excluded.
"""

import argparse
import time

import numpy as np

from adaptiveload.adaln import _kernels_numba, _kernels_numpy

BACKENDS = {"numba": _kernels_numba, "numpy": _kernels_numpy}


def parse_sizes(text):
    out = []
    for part in text.split(","):
        n, d = part.lower().split("x")
        out.append((int(n), int(d)))
    return out


def bench(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="8192x1024,32768x1024,65536x512")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--d-tile", type=int, default=64)
    ap.add_argument("--n-tile", type=int, default=1024)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'size':>14} {'kernel':>14} {'numba (ms)':>12} {'numpy (ms)':>12} {'ratio':>7}")
    for n, d in parse_sizes(args.sizes):
        x = rng.standard_normal((n, d))
        scale = 0.1 * rng.standard_normal(d)
        shift = 0.1 * rng.standard_normal(d)
        dy = rng.standard_normal((n, d))
        _, mu, rstd = _kernels_numpy.forward(x, scale, shift, 1e-6)
        d_tile, n_tile = min(args.d_tile, d), min(args.n_tile, n)

        cases = {
            "forward": lambda impl: impl.forward(x, scale, shift, 1e-6),
            "backward_naive": lambda impl: impl.backward_naive(dy, x, scale, mu, rstd),
            "dtile_f64": lambda impl: impl.dtile_reduce(
                dy, x, mu, rstd, d_tile, n_tile, False
            ),
            "dtile_f32": lambda impl: impl.dtile_reduce(
                dy, x, mu, rstd, d_tile, n_tile, True
            ),
        }
        for name, call in cases.items():
            call(_kernels_numba)  # warm up JIT
            t_nb = bench(lambda: call(_kernels_numba), args.repeats)
            t_np = bench(lambda: call(_kernels_numpy), args.repeats)
            print(
                f"{n}x{d:>6} {name:>14} {1e3 * t_nb:12.2f} {1e3 * t_np:12.2f} "
                f"{t_np / t_nb:6.2f}x"
            )


if __name__ == "__main__":
    main()
