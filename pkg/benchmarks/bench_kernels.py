#!/usr/bin/env python3
"""Benchmark the jit-compiled tracking kernels against the numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--seconds N] [--bins K] [--repeats R]

Generates a synthetic log-power spectrogram of the requested size and runs
each tracker once per backend after a warmup pass, printing per-backend
timings and speedups.  The three-state tracker couples neighbouring bins, so
its fallback runs the interpreted loops and is expected to be far slower.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from modkal import _kernels, armodel, modkf


def make_problem(seconds: float, bins: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    frames = round(seconds / 0.010)
    tracks = rng.standard_normal((frames, bins)).cumsum(axis=0) * 0.2
    y = tracks + 0.7 * rng.standard_normal((frames, bins))
    coeffs, resid, mu = armodel.ar2_window_fits(y, 16, 4)
    widx = np.minimum(np.arange(frames) // 4, coeffs.shape[0] - 1)
    b1, iq = modkf._intra_fits(y, 16, 4)
    return y, coeffs, resid, mu, widx, b1, iq


def timed(fn, *args, repeats=3, **kwargs):
    fn(*args, **kwargs)  # warmup (includes jit compilation on first call)
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args, **kwargs)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seconds", type=float, default=30.0,
                        help="length of the synthetic utterance")
    parser.add_argument("--bins", type=int, default=161)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not _kernels.USE_NUMBA:
        print("note: numba backend unavailable or disabled "
              "(MODKAL_NO_NUMBA); both columns will run the fallback")

    y, coeffs, resid, mu, widx, b1, iq = make_problem(args.seconds, args.bins)
    y_amp = np.exp(0.5 * y)
    frames = y.shape[0]
    print(f"problem: {frames} frames x {args.bins} bins "
          f"({args.seconds:.0f} s at 10 ms hop)\n")
    print(f"{'tracker':<22} {'numba (s)':>10} {'numpy (s)':>10} {'speedup':>9}")
    print("-" * 55)

    rows = [
        ("log-power 2-state",
         lambda backend: _kernels.run_logpower_tracker(
             y, coeffs, resid, mu, widx, backend=backend)),
        ("log-power 3-state",
         lambda backend: _kernels.run_logpower_tracker(
             y, coeffs, resid, mu, widx, w_intra=0.3, intra_coeff=b1,
             intra_resid=iq, backend=backend)),
        ("amplitude 2-state",
         lambda backend: _kernels.run_amplitude_tracker(
             y_amp, y, coeffs, resid, mu, widx, backend=backend)),
    ]
    for name, runner in rows:
        t_fast = timed(runner, "numba", repeats=args.repeats)
        t_slow = timed(runner, "numpy", repeats=args.repeats)
        print(f"{name:<22} {t_fast:>10.4f} {t_slow:>10.4f} "
              f"{t_slow / t_fast:>8.1f}x")

    fast = _kernels.run_logpower_tracker(y, coeffs, resid, mu, widx,
                                         backend="numba")
    slow = _kernels.run_logpower_tracker(y, coeffs, resid, mu, widx,
                                         backend="numpy")
    print(f"\nmax |numba - numpy| on the 2-state outputs: "
          f"{np.max(np.abs(fast[0] - slow[0])):.3e}")


if __name__ == "__main__":
    main()
