# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled split-search and tree-traversal kernels.

Mirrors ``masim._kernels_py`` operation for operation so both backends
produce bit-identical splits. Keep the arithmetic order in sync when editing.

Split kernels take the feature-major matrix ``Xt`` (features x rows) so the
per-feature gathers stay within one contiguous row.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, calloc, free
from libc.math cimport INFINITY

cnp.import_array()

ctypedef cnp.intp_t intp


cdef struct Entry:
    double v
    double y
    intp c
    intp pos


cdef inline bint _less(Entry* a, Entry* b) noexcept nogil:
    return a.v < b.v or (a.v == b.v and a.pos < b.pos)


cdef inline void _swap(Entry* e, intp i, intp j) noexcept nogil:
    cdef Entry t = e[i]
    e[i] = e[j]
    e[j] = t


cdef void _sort(Entry* e, intp n) noexcept nogil:
    # quicksort on (v, pos) with median-of-three pivots; (v, pos) keys are
    # distinct so the result is unique regardless of algorithm
    cdef intp mid, i, j
    cdef Entry pivot, t
    while n > 16:
        mid = n // 2
        if _less(&e[mid], &e[0]):
            _swap(e, mid, 0)
        if _less(&e[n - 1], &e[0]):
            _swap(e, n - 1, 0)
        if _less(&e[n - 1], &e[mid]):
            _swap(e, n - 1, mid)
        pivot = e[mid]
        i = 0
        j = n - 1
        while True:
            while _less(&e[i], &pivot):
                i += 1
            while _less(&pivot, &e[j]):
                j -= 1
            if i >= j:
                break
            _swap(e, i, j)
            i += 1
            j -= 1
        # recurse on the smaller side, loop on the larger
        if j + 1 < n - j - 1:
            _sort(e, j + 1)
            e = e + j + 1
            n = n - j - 1
        else:
            _sort(e + j + 1, n - j - 1)
            n = j + 1
    for i in range(1, n):
        t = e[i]
        j = i - 1
        while j >= 0 and _less(&t, &e[j]):
            e[j + 1] = e[j]
            j -= 1
        e[j + 1] = t


cdef inline double _midpoint(double a, double b) noexcept nogil:
    cdef double t = (a + b) * 0.5
    if t >= b:
        t = a
    return t


def best_split_gini(const double[:, ::1] Xt, const intp[::1] y, intp n_classes,
                    const intp[::1] idx, const intp[::1] features, intp min_leaf):
    """Best Gini split over ``features`` for the rows in ``idx``.

    Returns ``(feature, threshold, gain)``; feature is -1 when no admissible
    split exists. Gain is the weighted impurity decrease times the node size.
    """
    cdef intp m = idx.shape[0]
    cdef intp nf = features.shape[0]
    cdef intp i, j, f, c, nL, nR
    cdef long long sq_total = 0, sqL, sqR
    cdef double gain, best_gain = -INFINITY, best_thr = 0.0
    cdef intp best_f = -1
    if m < 2:
        return -1, 0.0, -INFINITY
    cdef Entry* entries = <Entry*> malloc(m * sizeof(Entry))
    cdef long long* total = <long long*> calloc(n_classes, sizeof(long long))
    cdef long long* left = <long long*> calloc(n_classes, sizeof(long long))
    cdef long long* right = <long long*> calloc(n_classes, sizeof(long long))
    if entries == NULL or total == NULL or left == NULL or right == NULL:
        free(entries); free(total); free(left); free(right)
        raise MemoryError()
    try:
        with nogil:
            for i in range(m):
                total[y[idx[i]]] += 1
            for c in range(n_classes):
                sq_total += total[c] * total[c]
            for j in range(nf):
                f = features[j]
                for i in range(m):
                    entries[i].v = Xt[f, idx[i]]
                    entries[i].c = y[idx[i]]
                    entries[i].pos = i
                _sort(entries, m)
                for c in range(n_classes):
                    left[c] = 0
                    right[c] = total[c]
                sqL = 0
                sqR = sq_total
                for i in range(m - 1):
                    c = entries[i].c
                    sqL += 2 * left[c] + 1
                    sqR -= 2 * right[c] - 1
                    left[c] += 1
                    right[c] -= 1
                    nL = i + 1
                    nR = m - nL
                    if nL < min_leaf or nR < min_leaf:
                        continue
                    if not (entries[i].v < entries[i + 1].v):
                        continue
                    gain = (<double> sqL) / nL + (<double> sqR) / nR - (<double> sq_total) / m
                    if gain > best_gain:
                        best_gain = gain
                        best_f = f
                        best_thr = _midpoint(entries[i].v, entries[i + 1].v)
    finally:
        free(entries); free(total); free(left); free(right)
    return best_f, best_thr, best_gain


def best_split_mse(const double[:, ::1] Xt, const double[::1] y,
                   const intp[::1] idx, const intp[::1] features, intp min_leaf):
    """Best variance-reduction split; same return convention as the Gini kernel."""
    cdef intp m = idx.shape[0]
    cdef intp nf = features.shape[0]
    cdef intp i, j, f, nL, nR
    cdef double sT, sL, sR, gain, best_gain = -INFINITY, best_thr = 0.0
    cdef intp best_f = -1
    if m < 2:
        return -1, 0.0, -INFINITY
    cdef Entry* entries = <Entry*> malloc(m * sizeof(Entry))
    if entries == NULL:
        raise MemoryError()
    try:
        with nogil:
            for j in range(nf):
                f = features[j]
                for i in range(m):
                    entries[i].v = Xt[f, idx[i]]
                    entries[i].y = y[idx[i]]
                    entries[i].pos = i
                _sort(entries, m)
                sT = 0.0
                for i in range(m):
                    sT = sT + entries[i].y
                sL = 0.0
                for i in range(m - 1):
                    sL = sL + entries[i].y
                    nL = i + 1
                    nR = m - nL
                    if nL < min_leaf or nR < min_leaf:
                        continue
                    if not (entries[i].v < entries[i + 1].v):
                        continue
                    sR = sT - sL
                    gain = sL * sL / nL + sR * sR / nR - sT * sT / m
                    if gain > best_gain:
                        best_gain = gain
                        best_f = f
                        best_thr = _midpoint(entries[i].v, entries[i + 1].v)
    finally:
        free(entries)
    return best_f, best_thr, best_gain


def apply_tree(const double[:, ::1] X, const intp[::1] feature, const double[::1] threshold,
               const intp[::1] left, const intp[::1] right):
    """Leaf index reached by every row of ``X``."""
    cdef intp n = X.shape[0]
    cdef intp i, node
    out = np.empty(n, dtype=np.intp)
    cdef intp[::1] leaves = out
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            leaves[i] = node
    return out
