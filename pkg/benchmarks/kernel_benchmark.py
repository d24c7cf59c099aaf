"""Time the numba kernels against their pure-numpy fallbacks.

Runs the two hot paths (pairwise mixture-discrepancy sums and boosted-tree
growth) at a few sizes and prints a table with the speedup. The numba side
includes a warm-up call so JIT compilation is not billed.

    python3 benchmarks/kernel_benchmark.py [--quick]
"""

import argparse
import time

import numpy as np

from uddml.kernels import numba_impl, numpy_impl


def _best_of(fn, repeats=3):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_discrepancy(sizes, repeats):
    rows = []
    for m, q in sizes:
        rng = np.random.default_rng(0)
        U = rng.random((m, q))
        numba_impl.kernel_self_sum(U[:8])  # warm-up / compile
        t_nb = _best_of(lambda: numba_impl.kernel_self_sum(U), repeats)
        t_np = _best_of(lambda: numpy_impl.kernel_self_sum(U), repeats)
        rows.append((f"discrepancy self-sum m={m} q={q}", t_nb, t_np))
    return rows


def bench_trees(sizes, repeats):
    rows = []
    for m, p in sizes:
        rng = np.random.default_rng(1)
        X = rng.normal(size=(m, p))
        y = np.sin(X[:, 0]) + 0.5 * X[:, 1] + rng.normal(size=m) * 0.3
        grad = -(y - y.mean())
        hess = np.ones(m)
        order = np.ascontiguousarray(
            np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
        args = (X, order, grad, hess, 5, 31, 20, 1e-3, 0.0)
        numba_impl.grow_tree(*args)  # warm-up / compile

        def run(impl):
            def inner():
                for _ in range(20):
                    impl.grow_tree(*args)
            return inner

        t_nb = _best_of(run(numba_impl), repeats)
        t_np = _best_of(run(numpy_impl), repeats)
        rows.append((f"grow_tree x20 m={m} p={p}", t_nb, t_np))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="smaller sizes, single repeat")
    args = parser.parse_args()
    repeats = 1 if args.quick else 3
    if args.quick:
        disc_sizes = [(500, 5)]
        tree_sizes = [(2000, 10)]
    else:
        disc_sizes = [(500, 5), (2500, 9)]
        tree_sizes = [(2000, 10), (25000, 10)]

    rows = bench_discrepancy(disc_sizes, repeats)
    rows += bench_trees(tree_sizes, repeats)
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numba':>9}  {'numpy':>9}  {'speedup':>8}")
    for name, t_nb, t_np in rows:
        print(f"{name:<{width}}  {t_nb:9.4f}  {t_np:9.4f}  {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
