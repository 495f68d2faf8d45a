"""Time the compiled split-search kernel against the numpy fallback.

Usage: python benchmarks/bench_splitter.py [--n 5000] [--d 50] [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from revsent.classical import _splitter_py, splitter
from revsent.classical import tree as tree_mod


def _fit_forest(X, y, n_trees, backend):
    rng = np.random.default_rng(0)
    for _ in range(n_trees):
        samples = rng.integers(0, X.shape[0], size=X.shape[0])
        tree_mod.grow_tree(X, y=y, n_classes=2, samples=samples, max_features="sqrt", rng=rng,
                           backend=backend)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--d", type=int, default=50)
    ap.add_argument("--trees", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    X = rng.normal(size=(args.n, args.d))
    y = (X[:, 0] + X[:, 1] ** 2 + rng.normal(size=args.n) > 1).astype(np.int64)
    target = X[:, 2] + 0.1 * rng.normal(size=args.n)
    samples = np.arange(args.n, dtype=np.int64)
    feats = np.arange(args.d, dtype=np.int64)

    backends = {"python": _splitter_py}
    if "cython" in splitter.BACKENDS:
        backends["cython"] = splitter.BACKENDS["cython"]
    else:
        print("compiled kernel not built; timing the numpy fallback only")

    print(f"n={args.n} d={args.d} trees={args.trees} (best of {args.repeat})")
    print(f"{'backend':<8} {'gini split':>12} {'mse split':>12} {'forest fit':>12}")
    results = {}
    for name, mod in backends.items():
        g = min(timeit.repeat(lambda: mod.best_split_gini(X, y, 2, samples, feats), number=1, repeat=args.repeat))
        m = min(timeit.repeat(lambda: mod.best_split_mse(X, target, samples, feats), number=1, repeat=args.repeat))
        f = min(timeit.repeat(lambda: _fit_forest(X, y, args.trees, mod), number=1, repeat=max(1, args.repeat // 2)))
        results[name] = (g, m, f)
        print(f"{name:<8} {g * 1e3:>10.2f}ms {m * 1e3:>10.2f}ms {f * 1e3:>10.1f}ms")
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        print(f"{'speedup':<8} {py[0] / cy[0]:>11.1f}x {py[1] / cy[1]:>11.1f}x {py[2] / cy[2]:>11.1f}x")


if __name__ == "__main__":
    main()
