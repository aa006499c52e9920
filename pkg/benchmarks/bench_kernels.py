"""Time the compiled kernels against the numpy fallback and confirm they agree.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--rows 2000] [--features 50]
"""

from __future__ import annotations

import argparse
import contextlib
import time

import numpy as np

from masim import kernels
from masim.ensemble import trees


@contextlib.contextmanager
def backend(mod):
    saved = kernels.best_split_gini, kernels.best_split_mse, kernels.apply_tree
    kernels.best_split_gini, kernels.best_split_mse, kernels.apply_tree = (
        mod.best_split_gini, mod.best_split_mse, mod.apply_tree)
    try:
        yield
    finally:
        kernels.best_split_gini, kernels.best_split_mse, kernels.apply_tree = saved


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--features", type=int, default=50)
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    n, d = args.rows, args.features
    X = rng.standard_normal((n, d))
    Xt = np.ascontiguousarray(X.T)
    yc = (X[:, :3].sum(axis=1) > 0).astype(np.intp)
    yr = X[:, :5] @ rng.standard_normal(5) + rng.standard_normal(n)
    idx = np.arange(n, dtype=np.intp)
    feats = np.arange(d, dtype=np.intp)
    params = trees.WeakLearnerParams(max_depth=6, min_leaf=2)
    tree = trees.fit_classifier(X, yc, 2, params, np.random.default_rng(1))
    arrays = (tree.feature, tree.threshold, tree.left, tree.right)

    cases = {
        "best_split_gini": lambda m: m.best_split_gini(Xt, yc, 2, idx, feats, 2),
        "best_split_mse": lambda m: m.best_split_mse(Xt, yr, idx, feats, 2),
        "apply_tree": lambda m: m.apply_tree(X, *arrays),
    }
    print(f"rows={n} features={d} repeat={args.repeat} (best wall time)")
    print(f"{'case':<22}{'compiled ms':>12}{'python ms':>12}{'speedup':>10}  agree")
    for name, fn in cases.items():
        tc, oc = best_of(lambda: fn(kernels.compiled_backend), args.repeat)
        tp, op = best_of(lambda: fn(kernels.python_backend), args.repeat)
        same = all(np.array_equal(a, b) for a, b in zip(np.atleast_1d(oc), np.atleast_1d(op))) \
            if isinstance(oc, tuple) else np.array_equal(oc, op)
        print(f"{name:<22}{tc * 1e3:>12.2f}{tp * 1e3:>12.2f}{tp / tc:>10.1f}  {same}")

    def fit():
        return trees.fit_classifier(X, yc, 2, params, np.random.default_rng(1)).serialize()

    with backend(kernels.compiled_backend):
        tc, sc = best_of(fit, args.repeat)
    with backend(kernels.python_backend):
        tp, sp = best_of(fit, args.repeat)
    print(f"{'fit_classifier d=6':<22}{tc * 1e3:>12.2f}{tp * 1e3:>12.2f}{tp / tc:>10.1f}  {sc == sp}")


if __name__ == "__main__":
    main()
