"""Gain-ratio feature ranking with supervised MDL discretization.

Numeric features are cut recursively at the boundary that minimizes class
entropy, and a cut is kept only if its information gain passes the
minimum-description-length test of Fayyad and Irani. The gain ratio of the
resulting discrete feature is its information gain about the class divided by
its own entropy (bits).
"""

from __future__ import annotations

import math

import numpy as np


def entropy(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _class_counts(labels, n_classes):
    return np.bincount(labels, minlength=n_classes)


def _mdl_cuts(values, labels, n_classes):
    """Cut points for sorted ``values`` (with matching ``labels``)."""
    n = len(values)
    if n < 2:
        return []
    # cumulative class counts at every position
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), labels] = 1
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    # candidate boundaries: between distinct consecutive values
    cand = np.nonzero(values[1:] > values[:-1])[0]
    if len(cand) == 0:
        return []
    left = cum[cand]
    right = total - left
    nl = left.sum(axis=1).astype(float)
    nr = right.sum(axis=1).astype(float)

    def ent_rows(c, size):
        p = c / size[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, p * np.log2(p), 0.0)
        return -terms.sum(axis=1)

    e_left = ent_rows(left, nl)
    e_right = ent_rows(right, nr)
    weighted = (nl * e_left + nr * e_right) / n
    best = int(np.argmin(weighted))  # first minimum wins ties
    pos = cand[best]

    e_all = entropy(total)
    gain = e_all - weighted[best]
    k = np.count_nonzero(total)
    k1 = np.count_nonzero(left[best])
    k2 = np.count_nonzero(right[best])
    delta = math.log2(3**k - 2) - (k * e_all - k1 * e_left[best] - k2 * e_right[best])
    if gain <= (math.log2(n - 1) + delta) / n:
        return []
    cut = (values[pos] + values[pos + 1]) / 2.0
    lo = _mdl_cuts(values[: pos + 1], labels[: pos + 1], n_classes)
    hi = _mdl_cuts(values[pos + 1 :], labels[pos + 1 :], n_classes)
    return lo + [cut] + hi


def mdl_discretize(values, labels) -> np.ndarray:
    """Sorted cut points for one numeric feature (possibly empty)."""
    values = np.asarray(values, dtype=float)
    _, labels = np.unique(np.asarray(labels), return_inverse=True)
    order = np.argsort(values, kind="mergesort")
    n_classes = int(labels.max()) + 1 if len(labels) else 1
    return np.array(_mdl_cuts(values[order], labels[order], n_classes))


def gain_ratio(codes, labels) -> float:
    """Gain ratio of a discrete feature; 0 when the feature has no entropy."""
    _, codes = np.unique(np.asarray(codes), return_inverse=True)
    _, labels = np.unique(np.asarray(labels), return_inverse=True)
    n = len(labels)
    if n == 0:
        return 0.0
    table = np.zeros((codes.max() + 1, labels.max() + 1))
    np.add.at(table, (codes, labels), 1)
    split_info = entropy(table.sum(axis=1))
    if split_info <= 0:
        return 0.0
    h_class = entropy(table.sum(axis=0))
    h_cond = sum(row.sum() / n * entropy(row) for row in table)
    return max(h_class - h_cond, 0.0) / split_info


def gain_ratio_ranking(X, y, feature_names, categorical=()) -> list[tuple[str, float]]:
    """(feature, gain ratio) pairs, best first; ties ordered by name."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    scores = []
    for i, name in enumerate(feature_names):
        col = X[:, i]
        if name in categorical:
            codes = col
        else:
            cuts = mdl_discretize(col, y)
            codes = np.searchsorted(cuts, col, side="left") if len(cuts) else np.zeros(len(col), int)
        scores.append((name, gain_ratio(codes, y)))
    return sorted(scores, key=lambda kv: (-kv[1], kv[0]))
