#!/usr/bin/env python3
"""Time the hot kernels on training-sized inputs, numba vs numpy.

Run:  python benchmarks/bench_kernels.py [--n 4096] [--taps 64] [--reps 200]

The active backend for library code is picked by SIC_LAB_BACKEND; this script
always times both implementations directly.
"""

import argparse
import time

import numpy as np

from sic_lab import kernels


def bench(fn, args, reps):
    fn(*args)  # warmup / jit compile
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - t0) / reps * 1e6


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=4096, help="sequence length")
    ap.add_argument("--taps", type=int, default=64, help="FIR length")
    ap.add_argument("--hidden", type=int, default=16, help="MLP width")
    ap.add_argument("--reps", type=int, default=200)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n, L, H = args.n, args.taps, args.hidden
    xr, xi = rng.standard_normal(n), rng.standard_normal(n)
    hr, hi = rng.standard_normal(L), rng.standard_normal(L)
    ar, ai = rng.standard_normal(n), rng.standard_normal(n)
    hid = np.tanh(rng.standard_normal((n, H)))
    flat = rng.standard_normal(4 * H)
    adam_args = lambda: (  # noqa: E731 - fresh state each call keeps it honest
        flat.copy(),
        rng.standard_normal(4 * H),
        np.zeros(4 * H),
        np.zeros(4 * H),
        3,
        0.03,
        0.9,
        0.999,
        1e-8,
    )

    cases = {
        "quantize_midrise": (np.concatenate([xr, xi]), 1.0, 4096),
        "conv_fwd": (xr, xi, hr, hi),
        "conv_grad_taps": (ar, ai, xr, xi, L),
        "conv_grad_input": (ar, ai, hr, hi),
        "tanh_bwd": (hid, hid),
        "adam_update": adam_args(),
    }

    print(f"n={n} taps={L} hidden={H} reps={args.reps}  (times in us/call)")
    print(f"{'kernel':<18}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, case in cases.items():
        t_np = bench(kernels.numpy_impl[name], case, args.reps)
        if kernels.numba_impl is None:
            print(f"{name:<18}{t_np:>12.1f}{'n/a':>12}{'':>10}")
            continue
        t_nb = bench(kernels.numba_impl[name], case, args.reps)
        print(f"{name:<18}{t_np:>12.1f}{t_nb:>12.1f}{t_np / t_nb:>9.2f}x")
    print("\ntanh forward is not backend-switched (numpy's vectorized libm wins).")


if __name__ == "__main__":
    main()
