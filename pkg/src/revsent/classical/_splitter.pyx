# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Best-split search, compiled kernel.

Same contract and bit-identical scores as ``_splitter_py``; the scan over
sorted positions runs in C without per-feature temporaries.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport calloc, free

cnp.import_array()


cdef inline double _threshold(double lo, double hi) noexcept nogil:
    cdef double mid = (lo + hi) / 2.0
    return lo if mid == hi else mid


def best_split_gini(const double[:, :] X, const long[:] y, int n_classes, samples, features,
                    int min_leaf=1):
    cdef const long[:] idx = np.asarray(samples, dtype=np.int64)
    cdef const long[:] feats = np.asarray(features, dtype=np.int64)
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t i, c, k, f
    cdef double[:] values = np.empty(n, dtype=np.float64)
    cdef long[:] order
    cdef double *total = <double *> calloc(n_classes, sizeof(double))
    cdef double *left = <double *> calloc(n_classes, sizeof(double))
    cdef double best, score, sq_l, sq_r, r, nl, nr, best_t = np.nan
    cdef long best_f = -1
    if total == NULL or left == NULL:
        free(total); free(left)
        raise MemoryError()
    try:
        for i in range(n):
            total[y[idx[i]]] += 1.0
        best = 0.0
        for c in range(n_classes):
            best += total[c] * total[c]
        best = best / n
        for k in range(feats.shape[0]):
            f = feats[k]
            for i in range(n):
                values[i] = X[idx[i], f]
            order = np.argsort(np.asarray(values), kind="stable")
            for c in range(n_classes):
                left[c] = 0.0
            with nogil:
                for i in range(n - 1):
                    left[y[idx[order[i]]]] += 1.0
                    if values[order[i]] >= values[order[i + 1]]:
                        continue
                    nl = i + 1
                    nr = n - nl
                    if nl < min_leaf or nr < min_leaf:
                        continue
                    sq_l = 0.0
                    sq_r = 0.0
                    for c in range(n_classes):
                        sq_l += left[c] * left[c]
                        r = total[c] - left[c]
                        sq_r += r * r
                    score = sq_l / nl + sq_r / nr
                    if score > best:
                        best = score
                        best_f = f
                        best_t = _threshold(values[order[i]], values[order[i + 1]])
    finally:
        free(total)
        free(left)
    return int(best_f), float(best_t), float(best)


def best_split_mse(const double[:, :] X, const double[:] target, samples, features, int min_leaf=1):
    cdef const long[:] idx = np.asarray(samples, dtype=np.int64)
    cdef const long[:] feats = np.asarray(features, dtype=np.int64)
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t i, k, f
    cdef double[:] values = np.empty(n, dtype=np.float64)
    cdef double[:] csum = np.empty(n, dtype=np.float64)
    cdef long[:] order
    cdef double acc, best, score, s_l, s_r, nl, nr, tot, best_t = np.nan
    cdef long best_f = -1

    acc = 0.0
    for i in range(n):
        acc = acc + target[idx[i]]
    best = acc * acc / n
    for k in range(feats.shape[0]):
        f = feats[k]
        for i in range(n):
            values[i] = X[idx[i], f]
        order = np.argsort(np.asarray(values), kind="stable")
        with nogil:
            acc = 0.0
            for i in range(n):
                acc = acc + target[idx[order[i]]]
                csum[i] = acc
            tot = csum[n - 1]
            for i in range(n - 1):
                if values[order[i]] >= values[order[i + 1]]:
                    continue
                nl = i + 1
                nr = n - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                s_l = csum[i]
                s_r = tot - s_l
                score = s_l * s_l / nl + s_r * s_r / nr
                if score > best:
                    best = score
                    best_f = f
                    best_t = _threshold(values[order[i]], values[order[i + 1]])
    return int(best_f), float(best_t), float(best)
