"""
Node impurities and information gains.

Gini impurity for categorical targets (pseudo-vs-real labels, categorical
auxiliary sources) and least-squares regression impurity for continuous
targets (continuous auxiliary sources, time).
"""
from typing import Sequence

import numpy as np


def gini(category_counts: Sequence[int]) -> float:
    """G = sum_{i != j} p_i p_j = 1 - sum p_i^2; 0 iff the node is pure."""
    counts = np.asarray(category_counts, dtype=np.float64)
    total = counts.sum()
    if total < 1:
        raise ValueError("gini needs a total count >= 1")
    p = counts / total
    return float(1.0 - np.dot(p, p))


def regression_impurity(values: Sequence[float]) -> float:
    """Population variance (1/|S|) sum (y - mean)^2."""
    y = np.asarray(values, dtype=np.float64)
    if y.size == 0:
        raise ValueError("regression_impurity needs a nonempty list")
    return float(np.mean((y - y.mean()) ** 2))


def classification_gain(parent_counts, left_counts, right_counts) -> float:
    """I_s - |L|/|S| I_l - |R|/|S| I_r with I = Gini."""
    parent = np.asarray(parent_counts, dtype=np.int64)
    left = np.asarray(left_counts, dtype=np.int64)
    right = np.asarray(right_counts, dtype=np.int64)
    if not np.array_equal(left + right, parent):
        raise ValueError("left + right counts must equal the parent counts")
    n_left, n_right = left.sum(), right.sum()
    if n_left == 0 or n_right == 0:
        raise ValueError("both children must be nonempty")
    n = n_left + n_right
    return gini(parent) - (n_left / n) * gini(left) - (n_right / n) * gini(right)


def regression_gain(parent_values, left_values, right_values) -> float:
    """Same form as the classification gain with I = regression impurity."""
    n_left, n_right = len(left_values), len(right_values)
    if n_left == 0 or n_right == 0:
        raise ValueError("both children must be nonempty")
    n = n_left + n_right
    return (
        regression_impurity(parent_values)
        - (n_left / n) * regression_impurity(left_values)
        - (n_right / n) * regression_impurity(right_values)
    )


def gini_rows(counts: np.ndarray) -> np.ndarray:
    """Row-wise Gini of a (c, V) count matrix; empty rows give 0."""
    counts = np.asarray(counts, dtype=np.float64)
    totals = counts.sum(axis=-1)
    safe = np.where(totals > 0, totals, 1.0)
    p = counts / safe[..., None]
    return np.where(totals > 0, 1.0 - np.sum(p * p, axis=-1), 0.0)


def variance_from_moments(count: np.ndarray, s: np.ndarray, ss: np.ndarray) -> np.ndarray:
    """Population variance from count, sum and sum of squares; empty groups give 0."""
    count = np.asarray(count, dtype=np.float64)
    safe = np.where(count > 0, count, 1.0)
    mean = s / safe
    var = ss / safe - mean * mean
    return np.where(count > 0, np.maximum(var, 0.0), 0.0)
