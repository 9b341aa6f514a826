#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs each hot kernel on training-shaped inputs with both backends and
prints a timing table plus max deviation. The active backend for library
code is chosen at import time (SEWNET_NO_NUMBA=1 forces numpy); this script
imports both implementations directly so one process covers both.

Usage: python benchmarks/bench_backends.py [--repeats 20]
"""

import argparse
import time

import numpy as np

from sewnet.kernels import _numpy as knp

try:
    from sewnet.kernels import _numba as knb
except ImportError:
    knb = None


def timeit(fn, *args, repeats=20):
    fn(*args)  # warm-up (JIT compile / cache touch)
    t0 = time.perf_counter()
    for _ in range(repeats):
        out = fn(*args)
    return (time.perf_counter() - t0) / repeats, out


def bench(name, args, repeats):
    t_np, ref = timeit(getattr(knp, name), *args, repeats=repeats)
    row = f"{name:22s} numpy {t_np * 1e3:9.3f} ms"
    if knb is not None:
        t_nb, out = timeit(getattr(knb, name), *args, repeats=repeats)
        dev = float(np.max(np.abs(np.asarray(out) - np.asarray(ref))))
        row += f"   numba {t_nb * 1e3:9.3f} ms   speedup {t_np / t_nb:6.2f}x   max dev {dev:.2e}"
    print(row)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    print(f"numba available: {knb is not None}")
    print()

    # dilated convolution on a training-shaped batch
    x = rng.standard_normal((64, 16, 64))
    w = rng.standard_normal((16, 16, 3))
    b = rng.standard_normal(16)
    bench("conv_forward", (x, w, b, 4), args.repeats)

    gy = rng.standard_normal((64, 16, 64))
    bench("conv_backward_input", (gy, w, 4), args.repeats)
    bench("conv_backward_kernel", (gy, x, 3, 4), args.repeats)

    # characteristic-function magnitudes (collapse diagnostic inner loop)
    samples = rng.standard_normal(50_000)
    k_grid = np.linspace(0.0, 8.0, 512)
    bench("cf_magnitude", (samples, k_grid), max(3, args.repeats // 4))

    # conditional-variance recursion (loop-carried, numpy pays per-step cost)
    r2 = rng.standard_normal(10_000) ** 2
    bench("garch_filter", (r2, 0.05, 0.1, 0.85, 1.0), args.repeats)

    # Durbin-Levinson sampler (the O(N^2) fallback path)
    n = 2048
    lags = np.arange(n, dtype=np.float64)
    acov = 0.5 * (np.abs(lags + 1) ** 1.4 - 2 * lags**1.4 + np.abs(lags - 1) ** 1.4)
    z = rng.standard_normal(n)
    bench("hosking_fgn", (acov, z), max(3, args.repeats // 4))


if __name__ == "__main__":
    main()
