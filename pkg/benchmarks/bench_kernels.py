#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Usage:
    python benchmarks/bench_kernels.py [--repeats 200]

Sizes mirror the real workload: 512-dim embeddings, 16 frames per clip,
30-trace x 10-iteration score matrices, 64x64 frame renders. Reports median
wall time per call and the numba speedup. The active-backend column shows
what an unmodified import would use (set CLIPSCRIPT_NUMBA=0 to flip it).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from clipscript import kernels


def median_time(fn, args, repeats: int, warmup: int = 3) -> float:
    for _ in range(warmup):
        fn(*args)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    if kernels.IMPLEMENTATIONS["numba"] is None:
        raise SystemExit(
            "numba backend unavailable (CLIPSCRIPT_NUMBA=0 or numba missing); "
            "nothing to compare"
        )

    rng = np.random.default_rng(0)
    u = rng.standard_normal(512)
    v = rng.standard_normal(512)
    frames_a = rng.standard_normal((16, 512))
    frames_b = rng.standard_normal((16, 512))
    trace = rng.random(10)
    traces = rng.random((30, 10))
    render_params = np.array(
        [3, 5, 40, 120, 30, 200, 10, 220, 90, 250, 60, 20, 32, 32, 100, 2, 31],
        dtype=np.int64,
    )

    cases = [
        ("cosine_raw (512-d pair)", "cosine_raw", (u, v)),
        ("paired_mean_cosine (16x512)", "paired_mean_cosine", (frames_a, frames_b)),
        ("prefix_max (10 scores)", "prefix_max", (trace,)),
        ("prefix_max_rows (30x10)", "prefix_max_rows", (traces,)),
        ("render_body (64x64 frame)", "render_body", (64, 64, render_params)),
    ]

    print(f"active backend: {kernels.BACKEND}; repeats={args.repeats}\n")
    header = f"{'kernel':<30} {'numpy':>12} {'numba':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for label, name, call_args in cases:
        t_np = median_time(kernels.IMPLEMENTATIONS["numpy"][name], call_args, args.repeats)
        t_nb = median_time(kernels.IMPLEMENTATIONS["numba"][name], call_args, args.repeats)
        print(
            f"{label:<30} {t_np * 1e6:>10.1f}us {t_nb * 1e6:>10.1f}us "
            f"{t_np / t_nb:>8.2f}x"
        )


if __name__ == "__main__":
    main()
