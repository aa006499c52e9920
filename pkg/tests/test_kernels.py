import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from masim import kernels
from masim import _kernels_py as py
from oracles import brute_gini_split, brute_mse_split

compiled = kernels.compiled_backend
needs_compiled = pytest.mark.skipif(compiled is None, reason="extension not built")

BACKENDS = [py] + ([compiled] if compiled is not None else [])


def _problem(seed, n, d, n_classes, dup):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    if dup:
        X = np.round(X, 1)  # heavy value ties
    y = rng.integers(n_classes, size=n).astype(np.intp)
    return X, y


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__)
@pytest.mark.parametrize("seed", range(20))
def test_gini_matches_brute_force(mod, seed):
    X, y = _problem(seed, 30, 3, 3, dup=seed % 2 == 0)
    Xt = np.ascontiguousarray(X.T)
    f, thr, gain = mod.best_split_gini(Xt, y, 3, np.arange(30, dtype=np.intp),
                                       np.arange(3, dtype=np.intp), 2)
    bf, (a, b), dec = brute_gini_split(X.tolist(), y.tolist(), 2)
    assert f == bf
    assert a <= thr < b
    assert gain == pytest.approx(dec, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__)
@pytest.mark.parametrize("seed", range(20))
def test_mse_matches_brute_force(mod, seed):
    rng = np.random.default_rng(100 + seed)
    X = np.round(rng.standard_normal((25, 3)), 1 if seed % 2 else 6)
    y = X[:, seed % 3] * 2 + rng.standard_normal(25)
    f, thr, gain = mod.best_split_mse(np.ascontiguousarray(X.T), y, np.arange(25, dtype=np.intp),
                                      np.arange(3, dtype=np.intp), 3)
    bf, (a, b), dec = brute_mse_split(X.tolist(), y.tolist(), 3)
    assert f == bf
    assert a <= thr < b
    assert gain == pytest.approx(dec, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__)
def test_no_admissible_split(mod):
    X = np.ones((6, 2))
    y = np.array([0, 1, 0, 1, 0, 1], dtype=np.intp)
    f, _, _ = mod.best_split_gini(np.ascontiguousarray(X.T), y, 2, np.arange(6, dtype=np.intp),
                                  np.arange(2, dtype=np.intp), 1)
    assert f == -1
    # too few rows for min_leaf on each side
    X = np.arange(6, dtype=float).reshape(6, 1)
    f, _, _ = mod.best_split_gini(np.ascontiguousarray(X.T), y, 2, np.arange(6, dtype=np.intp),
                                  np.arange(1, dtype=np.intp), 4)
    assert f == -1


@needs_compiled
@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 60), d=st.integers(1, 6),
       n_classes=st.integers(1, 4), min_leaf=st.integers(1, 5), dup=st.booleans())
def test_backends_bit_identical(seed, n, d, n_classes, min_leaf, dup):
    X, y = _problem(seed, n, d, n_classes, dup)
    Xt = np.ascontiguousarray(X.T)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=max(2, n // 2), replace=False)).astype(np.intp)
    feats = rng.permutation(d).astype(np.intp)
    assert compiled.best_split_gini(Xt, y, n_classes, idx, feats, min_leaf) == \
        py.best_split_gini(Xt, y, n_classes, idx, feats, min_leaf)
    yr = X @ rng.standard_normal(d)
    assert compiled.best_split_mse(Xt, yr, idx, feats, min_leaf) == \
        py.best_split_mse(Xt, yr, idx, feats, min_leaf)


@needs_compiled
def test_apply_tree_backends_agree():
    from masim.ensemble.trees import WeakLearnerParams, fit_classifier

    rng = np.random.default_rng(3)
    X = rng.standard_normal((300, 5))
    y = (X[:, 0] * X[:, 1] > 0).astype(np.intp)
    t = fit_classifier(X, y, 2, WeakLearnerParams(max_depth=5), rng)
    args = (t.feature, t.threshold, t.left, t.right)
    assert np.array_equal(compiled.apply_tree(X, *args), py.apply_tree(X, *args))


def test_backend_selection_is_reported():
    assert kernels.BACKEND in ("compiled", "python")
    assert (kernels.BACKEND == "compiled") == (kernels.compiled_backend is not None)


def test_pure_python_env_forces_fallback():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-c", "from masim import kernels; print(kernels.BACKEND)"],
                         env={"MASIM_PURE_PYTHON": "1", "PATH": ""}, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "python"
