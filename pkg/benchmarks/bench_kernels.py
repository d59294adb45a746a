#!/usr/bin/env python3
"""Benchmark the compiled scoring kernel against the numpy fallback.

Times the fused dual-path scoring (the per-query hot loop) and the raw
per-row dot products on database-scale matrices. Run:

    python3 benchmarks/bench_kernels.py [--n 123403] [--d 768] [--repeat 5]
"""

import argparse
import statistics
import time

import numpy as np

from imsearch.kernels import fallback

try:
    from imsearch.kernels import _native
except ImportError:
    _native = None


def unit_rows(rng, n, d, dtype=np.float32):
    rows = rng.standard_normal((n, d))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return np.ascontiguousarray(rows, dtype=dtype)


def time_call(fn, repeat):
    samples = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return min(samples), statistics.median(samples)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=123_403, help="database rows")
    parser.add_argument("--d", type=int, default=768, help="embedding dimension")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    v_text = unit_rows(rng, args.n, args.d)
    v_image = unit_rows(rng, args.n, args.d)
    queries = unit_rows(rng, 3, args.d, dtype=np.float64)
    query = queries[0]

    impls = [("python (numpy)", fallback)]
    if _native is not None:
        impls.append(("native (cython)", _native))
    else:
        print("note: compiled kernel not built; timing the fallback only")

    print(f"N={args.n} d={args.d} repeat={args.repeat}\n")
    print(f"{'kernel':<28} {'impl':<16} {'best':>10} {'median':>10}")
    results = {}
    for name, impl in impls:
        best, med = time_call(lambda: impl.fused_scores(v_text, v_image, queries, 0.15), args.repeat)
        results[("fused_scores", name)] = best
        print(f"{'fused_scores (3 queries)':<28} {name:<16} {best * 1e3:>8.2f}ms {med * 1e3:>8.2f}ms")
    for name, impl in impls:
        best, med = time_call(lambda: impl.dot_scores(v_text, query), args.repeat)
        results[("dot_scores", name)] = best
        print(f"{'dot_scores (1 query)':<28} {name:<16} {best * 1e3:>8.2f}ms {med * 1e3:>8.2f}ms")

    if _native is not None:
        got = _native.fused_scores(v_text, v_image, queries, 0.15)
        want = fallback.fused_scores(v_text, v_image, queries, 0.15)
        max_delta = float(np.max(np.abs(got - want)))
        print(f"\nmax |native - python| on fused scores: {max_delta:.3e}")
        for kernel in ("fused_scores", "dot_scores"):
            ratio = results[(kernel, "python (numpy)")] / results[(kernel, "native (cython)")]
            print(f"{kernel}: native is {ratio:.2f}x the numpy fallback")


if __name__ == "__main__":
    main()
