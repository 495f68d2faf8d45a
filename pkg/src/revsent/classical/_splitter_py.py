"""Best-split search, numpy implementation.

Scores are the "proxy" criteria that are maximised by the best split:

* gini:  sum_c n_lc^2 / n_l + sum_c n_rc^2 / n_r   (equivalent to minimising
  the size-weighted gini impurity of the children)
* mse:   S_l^2 / n_l + S_r^2 / n_r                  (S = sum of targets)

Count sums are exact integers in float64 and target sums are accumulated
sequentially, so the compiled kernel reproduces these numbers bit for bit.
"""

from __future__ import annotations

import numpy as np


def _threshold(lo: float, hi: float) -> float:
    mid = (lo + hi) / 2.0
    return lo if mid == hi else mid


def best_split_gini(X, y, n_classes, samples, features, min_leaf=1):
    """Return ``(feature, threshold, score)``; feature is -1 when no split helps."""
    samples = np.asarray(samples, dtype=np.int64)
    n = samples.size
    yy = y[samples]
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), yy] = 1.0
    total = onehot.sum(axis=0)
    best = float((total * total).sum() / n)  # parent proxy; a split must beat it
    best_f, best_t = -1, np.nan
    left_n = np.arange(1, n, dtype=np.float64)
    right_n = n - left_n
    for f in features:
        values = X[samples, f]
        order = np.argsort(values, kind="stable")
        v = values[order]
        valid = v[:-1] < v[1:]
        if min_leaf > 1:
            valid &= (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        score = (left * left).sum(axis=1) / left_n + (right * right).sum(axis=1) / right_n
        score[~valid] = -np.inf
        i = int(np.argmax(score))
        if score[i] > best:
            best, best_f, best_t = float(score[i]), int(f), _threshold(v[i], v[i + 1])
    return best_f, best_t, best


def best_split_mse(X, target, samples, features, min_leaf=1):
    samples = np.asarray(samples, dtype=np.int64)
    n = samples.size
    t = target[samples]
    csum_all = np.cumsum(t)
    total = float(csum_all[-1])
    best = total * total / n
    best_f, best_t = -1, np.nan
    left_n = np.arange(1, n, dtype=np.float64)
    right_n = n - left_n
    for f in features:
        values = X[samples, f]
        order = np.argsort(values, kind="stable")
        v = values[order]
        valid = v[:-1] < v[1:]
        if min_leaf > 1:
            valid &= (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        csum = np.cumsum(t[order])
        s_left = csum[:-1]
        s_right = csum[-1] - s_left
        score = s_left * s_left / left_n + s_right * s_right / right_n
        score[~valid] = -np.inf
        i = int(np.argmax(score))
        if score[i] > best:
            best, best_f, best_t = float(score[i]), int(f), _threshold(v[i], v[i + 1])
    return best_f, best_t, best
