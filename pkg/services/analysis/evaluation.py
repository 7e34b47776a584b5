"""
Clustering purity and tagging accuracy metrics.
"""
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.stats import entropy as _entropy
from sklearn.metrics import confusion_matrix

from libs.errors import AlignmentError

logger = logging.getLogger(__name__)

ENTROPY_BASES = {"e": None, "2": 2}


def entropy(p: np.ndarray, base: str = "e") -> np.ndarray:
    """Row-wise -sum p log p with 0 log 0 = 0."""
    if base not in ENTROPY_BASES:
        raise ValueError(f"entropy base must be 'e' or '2', got {base!r}")
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    with np.errstate(invalid="ignore", divide="ignore"):
        h = _entropy(p, base=ENTROPY_BASES[base], axis=1)
    return np.nan_to_num(h, nan=0.0)


def mean_entropy(profiles: np.ndarray, sizes: Sequence[int], weighted: bool = True, base: str = "e") -> float:
    """Mean entropy of per-cluster tag distributions; size-weighted by default."""
    h = entropy(profiles, base)
    sizes = np.asarray(sizes, dtype=np.float64)
    if h.shape != sizes.shape:
        raise ValueError(f"{h.size} profiles but {sizes.size} cluster sizes")
    if not weighted:
        return float(h.mean())
    return float(np.sum(h * sizes) / sizes.sum())


@dataclass
class TaggingResult:
    accuracy: float
    n_evaluated: int
    labels: list
    confusion: np.ndarray  # rows: true class, columns: predicted class

    @property
    def recall(self) -> np.ndarray:
        totals = self.confusion.sum(axis=1, keepdims=True)
        return np.divide(self.confusion, totals, out=np.zeros(self.confusion.shape), where=totals > 0)


def tagging_accuracy(
    predictions: Mapping[str, str],
    truth: Mapping[str, Optional[str]],
    labels: Optional[Sequence[str]] = None,
) -> TaggingResult:
    """
    Fraction of exact matches over samples whose true tag is known. Both
    mappings must cover the same sample ids.
    """
    if set(predictions) != set(truth):
        only_pred = sorted(set(predictions) - set(truth))[:5]
        only_truth = sorted(set(truth) - set(predictions))[:5]
        raise AlignmentError(
            f"prediction and truth ids differ (only predicted: {only_pred}, only in truth: {only_truth})"
        )
    ids = sorted(sid for sid, t in truth.items() if t is not None)
    if labels is None:
        labels = sorted({truth[s] for s in ids} | {predictions[s] for s in ids})
    n = len(ids)
    if n:
        confusion = confusion_matrix([truth[s] for s in ids], [predictions[s] for s in ids], labels=list(labels))
    else:
        confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    accuracy = float(np.trace(confusion) / n) if n else 0.0
    logger.debug(f"Tagging accuracy {accuracy:.4f} over {n} samples")
    return TaggingResult(accuracy, n, list(labels), confusion)
