#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times the three loop-bound kernels (cyclic Jacobi eigensolver, affinity
propagation message iteration, constrained assignment pass) on synthetic
inputs and prints per-backend medians. The BLAS-bound model math is the same
in both backends and is not benchmarked here.

Usage: python benchmarks/bench_kernels.py [--n 200] [--repeats 5]
"""

import argparse
import statistics
import time

import numpy as np

from pcgrbm._backend import available_backends


def time_call(fn, repeats):
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def bench_jacobi(mod, n, rng, repeats):
    M = rng.normal(size=(n, n))
    M = (M + M.T) / 2.0

    def run():
        A = np.array(M, order="C")
        V = np.eye(n)
        mod.jacobi_eigh(A, V, 1e-10, 100)

    return time_call(run, repeats)


def bench_ap(mod, n, rng, repeats, iterations=50):
    X = rng.normal(size=(n, 4))
    sq = (X**2).sum(axis=1)
    S = -(sq[:, None] - 2 * X @ X.T + sq[None, :])
    S = np.ascontiguousarray(S)

    def run():
        R = np.zeros((n, n))
        A = np.zeros((n, n))
        for _ in range(iterations):
            mod.ap_iterate(S, R, A, 0.9)

    return time_call(run, repeats)


def bench_assign(mod, n, rng, repeats, k=8, pairs_per_point=4, rounds=50):
    dist = rng.random((n, k))
    order = np.ascontiguousarray(np.argsort(dist, axis=1, kind="stable").astype(np.int64))
    neighbors = [[] for _ in range(n)]
    for i in range(n):
        for j in rng.choice(n, size=pairs_per_point, replace=False):
            if i != j:
                neighbors[i].append(int(j))
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i, ns in enumerate(neighbors):
        indptr[i + 1] = indptr[i] + len(ns)
    indices = np.array([j for ns in neighbors for j in ns], dtype=np.int64)
    empty_ptr = np.zeros(n + 1, dtype=np.int64)
    empty_idx = np.zeros(0, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)

    def run():
        for _ in range(rounds):
            mod.constrained_assign(order, empty_ptr, empty_idx, indptr, indices, out)

    return time_call(run, repeats)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=200, help="problem size")
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats (median)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    rng = np.random.default_rng(args.seed)
    benches = {
        f"jacobi_eigh (n={args.n})": bench_jacobi,
        f"ap_iterate x50 (n={args.n})": bench_ap,
        f"constrained_assign x50 (n={args.n})": bench_assign,
    }
    results = {}
    for label, bench in benches.items():
        results[label] = {
            name: bench(mod, args.n, np.random.default_rng(args.seed), args.repeats)
            for name, mod in backends.items()
        }

    width = max(len(label) for label in results)
    names = sorted(backends)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    for label, times in results.items():
        row = f"{label:<{width}}  " + "  ".join(f"{times[n] * 1e3:>10.2f}ms" for n in names)
        if len(names) == 2:
            row += f"  {times['python'] / times['compiled']:>7.1f}x"
        print(row)
    if "compiled" not in backends:
        print("\ncompiled backend not built; install with a C compiler to compare")


if __name__ == "__main__":
    main()
