"""
Node-level feature correlations recorded while trees grow.
"""
import numpy as np


def node_feature_correlation(left_nu, left_tau) -> float:
    """
    Agreement between the optimal partition of the chosen feature nu and the
    optimal partition of an alternative feature tau at the same node:

        lambda = (p - (1 - |L_nu & L_tau|/|S| - |R_nu & R_tau|/|S|)) / p,  p = min(|L_nu|, |R_nu|)/|S|

    clamped at 0; 1 iff the partitions are identical.
    """
    left_nu = np.asarray(left_nu, dtype=bool)
    left_tau = np.asarray(left_tau, dtype=bool)
    n = left_nu.size
    n_left = int(left_nu.sum())
    if n == 0 or n_left == 0 or n_left == n:
        raise ValueError("the chosen partition must be nonempty on both sides")
    p = min(n_left, n - n_left) / n
    agree_left = np.sum(left_nu & left_tau) / n
    agree_right = np.sum(~left_nu & ~left_tau) / n
    lam = (p - (1.0 - agree_left - agree_right)) / p
    return float(min(max(lam, 0.0), 1.0))


def node_visual_aux_correlation(aux_gain: float, root_impurity: float):
    """Normalised auxiliary gain of the chosen split; None when the root impurity is 0."""
    if root_impurity <= 0:
        return None
    return float(max(aux_gain / root_impurity, 0.0))
