"""
Summary baselines: uniform sampling over time and sufficient content change.
"""
import logging
from typing import List

import numpy as np

logger = logging.getLogger(__name__)

BISECTION_STEPS = 100


def baseline_uniform(n: int, target: int) -> List[int]:
    """Indices floor(i * n / target) for i < target."""
    if not 1 <= target <= n:
        raise ValueError(f"target must lie in [1, {n}], got {target}")
    return [(i * n) // target for i in range(target)]


def _distance(a: np.ndarray, b: np.ndarray, norm: str) -> float:
    if norm == "L1":
        return float(np.abs(a - b).sum())
    if norm == "L2":
        return float(np.linalg.norm(a - b))
    raise ValueError(f"norm must be L1 or L2, got {norm!r}")


def sufficient_change(X: np.ndarray, theta: float, norm: str = "L2") -> List[int]:
    """Scan in time order; keep a clip when it differs from the last kept clip by more than theta."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    kept = [0]
    for i in range(1, X.shape[0]):
        if _distance(X[i], X[kept[-1]], norm) > theta:
            kept.append(i)
    return kept


def baseline_sufficient_change(X: np.ndarray, target: int, norm: str = "L2") -> List[int]:
    """
    Sufficient-change selection whose threshold is bisected so that the number
    of kept clips matches `target` as closely as possible.
    """
    if target < 1:
        raise ValueError(f"target must be >= 1, got {target}")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    lo = 0.0
    hi = max((_distance(X[i], X[0], norm) for i in range(X.shape[0])), default=0.0)
    hi = max(hi * 2.0, 1e-12)
    best = sufficient_change(X, lo, norm)
    for _ in range(BISECTION_STEPS):
        if len(best) == target:
            break
        mid = (lo + hi) / 2.0
        kept = sufficient_change(X, mid, norm)
        if abs(len(kept) - target) < abs(len(best) - target):
            best = kept
        if len(kept) > target:
            lo = mid
        else:
            hi = mid
    logger.debug(f"Sufficient-change baseline: {len(best)} clips for target {target}")
    return best
