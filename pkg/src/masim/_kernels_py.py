"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``.

Every expression here is ordered to match the compiled version, so the two
backends agree bit-for-bit (same feature, threshold and gain).
"""

import numpy as np


def _sorted_columns(Xt, idx, features, *others):
    # stable sort on values in idx order == (value, position) ordering in C
    vals = Xt[np.ix_(features, idx)]  # (F, m)
    order = np.argsort(vals, axis=1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=1)
    rest = [np.ascontiguousarray(o[idx][order]) for o in others]
    return vals, order, rest


def _midpoints(a, b):
    t = (a + b) * 0.5
    return np.where(t >= b, a, t)


def _pick(gain, vals, features):
    if gain.size == 0:
        return -1, 0.0, -np.inf
    flat = int(np.argmax(gain))
    fi, i = divmod(flat, gain.shape[1])
    best = gain[fi, i]
    if not np.isfinite(best):
        return -1, 0.0, -np.inf
    thr = float(_midpoints(vals[fi, i], vals[fi, i + 1]))
    return int(features[fi]), thr, float(best)


def _admissible(vals, m, min_leaf):
    nL = np.arange(1, m)
    ok = (nL >= min_leaf) & (m - nL >= min_leaf)
    return ok[None, :] & (vals[:, :-1] < vals[:, 1:])


def best_split_gini(Xt, y, n_classes, idx, features, min_leaf):
    idx = np.asarray(idx, dtype=np.intp)
    features = np.asarray(features, dtype=np.intp)
    m = idx.shape[0]
    if m < 2 or features.size == 0:
        return -1, 0.0, -np.inf
    vals, _, (ys,) = _sorted_columns(Xt, idx, features, y)
    onehot = np.zeros(ys.shape + (n_classes,), dtype=np.int64)
    np.put_along_axis(onehot, ys[..., None], 1, axis=2)
    cum = np.cumsum(onehot, axis=1)[:, :-1, :]
    total = cum[0, -1, :] + onehot[0, -1, :]
    sq_total = int((total * total).sum())
    sqL = (cum * cum).sum(axis=2)
    rc = total[None, None, :] - cum
    sqR = (rc * rc).sum(axis=2)
    nL = np.arange(1, m, dtype=np.int64)
    nR = m - nL
    gain = sqL.astype(np.float64) / nL + sqR.astype(np.float64) / nR - float(sq_total) / m
    gain = np.where(_admissible(vals, m, min_leaf), gain, -np.inf)
    return _pick(gain, vals, features)


def best_split_mse(Xt, y, idx, features, min_leaf):
    idx = np.asarray(idx, dtype=np.intp)
    features = np.asarray(features, dtype=np.intp)
    m = idx.shape[0]
    if m < 2 or features.size == 0:
        return -1, 0.0, -np.inf
    vals, _, (ys,) = _sorted_columns(Xt, idx, features, y)
    cs = np.cumsum(ys, axis=1)
    sT = cs[:, -1:]
    sL = cs[:, :-1]
    sR = sT - sL
    nL = np.arange(1, m, dtype=np.float64)
    nR = m - nL
    gain = sL * sL / nL + sR * sR / nR - sT * sT / m
    gain = np.where(_admissible(vals, m, min_leaf), gain, -np.inf)
    return _pick(gain, vals, features)


def apply_tree(X, feature, threshold, left, right):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.intp)
    rows = np.arange(n)
    while True:
        f = feature[node]
        internal = f >= 0
        if not internal.any():
            return node
        r = rows[internal]
        nd = node[internal]
        go_left = X[r, f[internal]] <= threshold[nd]
        node[internal] = np.where(go_left, left[nd], right[nd])
