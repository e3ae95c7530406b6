#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Covers the two hot paths: the greedy matcher (dominates threshold sweeps
over long timelines) and the partial-likelihood accumulators (dominate
bootstrap refits). Run after building the extension:

    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import math
import time

import numpy as np

from ttskit import _kernels
from ttskit._kernels import pyref
from ttskit.survival import fit_partial_likelihood


def timeit(fn, repeats=5):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_greedy(rng, side):
    d = np.ascontiguousarray(rng.random((side, side)))
    row = {"case": f"greedy {side}x{side}"}
    row["python"] = timeit(lambda: pyref.greedy_pairs(d))
    if _kernels.HAVE_COMPILED:
        row["compiled"] = timeit(lambda: _kernels._core.greedy_pairs(d))
    return row


def bench_efron(rng, n, p):
    theta = np.ascontiguousarray(rng.uniform(0.5, 2.0, size=n))
    x = np.ascontiguousarray(rng.normal(size=(n, p)))
    sizes = []
    while sum(sizes) < n:
        sizes.append(min(int(rng.integers(1, 4)), n - sum(sizes)))
    sizes = np.asarray(sizes, dtype=np.int64)
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
    n_events = np.minimum(sizes, rng.integers(0, 3, size=len(sizes))).astype(np.int64)
    args = (theta, x, starts, sizes, n_events)
    row = {"case": f"efron score/info n={n} p={p}"}
    row["python"] = timeit(lambda: pyref.efron_score_info(*args))
    if _kernels.HAVE_COMPILED:
        row["compiled"] = timeit(lambda: _kernels._core.efron_score_info(*args))
    return row


def bench_bootstrap_style_fit(rng, n):
    group = (rng.random(n) < 0.5).astype(float)
    rate = 0.2 * np.exp(math.log(1.5) * group)
    t = rng.exponential(1.0 / rate)
    c = rng.uniform(0, 12, n)
    durations = np.minimum(t, c)
    events = t <= c
    x = np.column_stack([group, rng.normal(55, 10, n)])

    def fit():
        fit_partial_likelihood(durations, events, x, ("exposed", "age"))

    return {"case": f"full cox fit n={n} p=2", "selected": timeit(fit, repeats=3)}


def main():
    rng = np.random.default_rng(0)
    print(f"active backend: {_kernels.BACKEND}")
    if not _kernels.HAVE_COMPILED:
        print("compiled extension unavailable; timing the fallback only\n")

    rows = [
        bench_greedy(rng, 100),
        bench_greedy(rng, 300),
        bench_greedy(rng, 600),
        bench_efron(rng, 500, 2),
        bench_efron(rng, 2000, 4),
    ]
    header = f"{'case':34s} {'python (s)':>12s} {'compiled (s)':>13s} {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for row in rows:
        py = row.get("python")
        cy = row.get("compiled")
        speedup = f"{py / cy:8.1f}x" if py and cy else "      n/a"
        cy_txt = f"{cy:13.6f}" if cy else "          n/a"
        print(f"{row['case']:34s} {py:12.6f} {cy_txt} {speedup}")

    row = bench_bootstrap_style_fit(rng, 1000)
    print(f"\n{row['case']} via active backend ({_kernels.BACKEND}): {row['selected']:.4f}s")


if __name__ == "__main__":
    main()
