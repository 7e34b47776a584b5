"""
Joint information gain over visual, auxiliary and temporal terms.

    gain = a_v dI_v / I_v0 + sum_j a_j dI_j / I_j0 + a_t dI_t / I_t0

The visual term is the pseudo-vs-real Gini gain over all augmented rows at the
node. Auxiliary and temporal terms only see REAL rows (pseudo rows carry no
auxiliary values or timestamps): Gini gain for categorical sources, regression
impurity gain for continuous sources and time. Each term is normalised by the
tree-root impurity of its source; terms with empty support or zero root
impurity contribute 0.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from libs.analytics.impurity import gini_rows, variance_from_moments
from libs.analytics.sources import SourceWeights

logger = logging.getLogger(__name__)

# split acceptance threshold on the joint gain
GAIN_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class NodeSamples:
    """
    Augmented rows reaching a node.

    aux[j] holds category codes (-1 = missing) when n_categories[j] > 0, else
    floats (NaN = missing). Pseudo rows are missing in every source and in time.
    """
    is_pseudo: np.ndarray
    aux: Tuple[np.ndarray, ...]
    n_categories: Tuple[int, ...]
    time: np.ndarray

    def __len__(self) -> int:
        return self.is_pseudo.shape[0]

    def take(self, idx: np.ndarray) -> "NodeSamples":
        return NodeSamples(
            is_pseudo=self.is_pseudo[idx],
            aux=tuple(a[idx] for a in self.aux),
            n_categories=self.n_categories,
            time=self.time[idx],
        )


@dataclass(frozen=True)
class RootImpurities:
    visual: float
    aux: Tuple[float, ...]
    temporal: float

    def as_list(self):
        return [self.visual, list(self.aux), self.temporal]


def _categorical_counts(codes: np.ndarray, n_categories: int) -> np.ndarray:
    valid = codes >= 0
    return np.bincount(codes[valid], minlength=n_categories).astype(np.float64)


def _continuous_impurity(values: np.ndarray) -> float:
    v = values[~np.isnan(values)]
    return float(np.var(v)) if v.size else 0.0


def root_impurities(node: NodeSamples) -> RootImpurities:
    n_pseudo = int(node.is_pseudo.sum())
    visual = float(gini_rows(np.array([len(node) - n_pseudo, n_pseudo]))) if len(node) else 0.0
    aux = []
    for codes, k in zip(node.aux, node.n_categories):
        if k > 0:
            aux.append(float(gini_rows(_categorical_counts(codes, k))))
        else:
            aux.append(_continuous_impurity(codes))
    return RootImpurities(visual, tuple(aux), _continuous_impurity(node.time))


def adapt_weights(base: SourceWeights, deltas: Sequence[float]) -> SourceWeights:
    """
    Shrink each auxiliary weight by its missing fraction, a_i' = a_i (1 - d_i), and
    share the removed mass equally among all m + 2 weights (visual, every
    auxiliary including the reduced ones, temporal).
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.shape != (base.m,):
        raise ValueError(f"expected {base.m} missing fractions, got {deltas.shape}")
    if np.any(deltas < 0) or np.any(deltas > 1):
        raise ValueError("missing fractions must lie in [0, 1]")
    if base.m == 0 or not np.any(deltas > 0):
        return base

    alpha_aux = np.asarray(base.alpha_aux)
    removed = float(np.sum(deltas * alpha_aux))
    share = removed / (base.m + 2)
    return SourceWeights(
        alpha_v=base.alpha_v + share,
        alpha_aux=tuple(alpha_aux * (1.0 - deltas) + share),
        alpha_t=base.alpha_t + share,
    )


# ---------------------------------------------------------------------------
# scalar evaluation of one split
# ---------------------------------------------------------------------------

def _categorical_gain(codes: np.ndarray, go_left: np.ndarray, k: int) -> float:
    valid = codes >= 0
    n = int(valid.sum())
    if n == 0:
        return 0.0
    left = _categorical_counts(codes[go_left], k)
    right = _categorical_counts(codes[~go_left], k)
    parent = left + right
    n_left, n_right = left.sum(), right.sum()
    return float(
        gini_rows(parent) - (n_left / n) * gini_rows(left) - (n_right / n) * gini_rows(right)
    )


def _continuous_gain(values: np.ndarray, go_left: np.ndarray) -> float:
    valid = ~np.isnan(values)
    n = int(valid.sum())
    if n == 0:
        return 0.0
    left = values[go_left & valid]
    right = values[~go_left & valid]
    parent = values[valid]
    gain = np.var(parent)
    if left.size:
        gain -= (left.size / n) * np.var(left)
    if right.size:
        gain -= (right.size / n) * np.var(right)
    return float(gain)


def _normalised(delta: float, root: float) -> float:
    return delta / root if root > 0 else 0.0


def gain_terms(go_left: np.ndarray, node: NodeSamples, roots: RootImpurities) -> Tuple[float, Tuple[float, ...], float]:
    """Root-normalised (visual, per-auxiliary, temporal) gains of one split."""
    go_left = np.asarray(go_left, dtype=bool)
    n_left = int(go_left.sum())
    if n_left == 0 or n_left == len(node):
        return 0.0, tuple(0.0 for _ in node.aux), 0.0

    pseudo = node.is_pseudo
    left = np.array([np.sum(go_left & ~pseudo), np.sum(go_left & pseudo)])
    right = np.array([np.sum(~go_left & ~pseudo), np.sum(~go_left & pseudo)])
    n = len(node)
    dv = gini_rows(left + right) - (left.sum() / n) * gini_rows(left) - (right.sum() / n) * gini_rows(right)

    aux_terms = []
    for codes, k, root in zip(node.aux, node.n_categories, roots.aux):
        delta = _categorical_gain(codes, go_left, k) if k > 0 else _continuous_gain(codes, go_left)
        aux_terms.append(_normalised(delta, root))
    dt = _continuous_gain(node.time, go_left)
    return _normalised(float(dv), roots.visual), tuple(aux_terms), _normalised(dt, roots.temporal)


def joint_gain(go_left: np.ndarray, node: NodeSamples, weights: SourceWeights, roots: RootImpurities) -> float:
    """Weighted sum of the root-normalised gains of one candidate split."""
    visual, aux, temporal = gain_terms(go_left, node, roots)
    total = weights.alpha_v * visual + weights.alpha_t * temporal
    for alpha, term in zip(weights.alpha_aux, aux):
        total += alpha * term
    return float(total)


# ---------------------------------------------------------------------------
# vectorised evaluation of every threshold of one feature
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ThresholdScores:
    thresholds: np.ndarray  # (c,)
    gains: np.ndarray       # (c,)

    @property
    def empty(self) -> bool:
        return self.thresholds.size == 0

    def best(self) -> Tuple[int, float, float]:
        """(position, threshold, gain) of the first maximal gain."""
        pos = int(np.argmax(self.gains))
        return pos, float(self.thresholds[pos]), float(self.gains[pos])


def midpoint_thresholds(sorted_values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cut positions between consecutive distinct sorted values and their thresholds.

    Threshold t satisfies lo < t <= hi so that `x < t` reproduces the cut.
    """
    cut = np.nonzero(sorted_values[1:] > sorted_values[:-1])[0]
    lo = sorted_values[cut]
    hi = sorted_values[cut + 1]
    thr = lo + (hi - lo) / 2.0
    thr = np.where(thr > lo, thr, hi)
    return cut, thr


def _cumulative_categorical_gain(codes: np.ndarray, k: int, cut: np.ndarray) -> np.ndarray:
    valid = codes >= 0
    n = int(valid.sum())
    if n == 0:
        return np.zeros(cut.size)
    onehot = np.zeros((codes.size, k))
    onehot[np.nonzero(valid)[0], codes[valid]] = 1.0
    left = np.cumsum(onehot, axis=0)[cut]
    total = onehot.sum(axis=0)
    right = total[None, :] - left
    n_left = left.sum(axis=1)
    return gini_rows(total) - (n_left / n) * gini_rows(left) - ((n - n_left) / n) * gini_rows(right)


def _cumulative_continuous_gain(values: np.ndarray, cut: np.ndarray) -> np.ndarray:
    valid = ~np.isnan(values)
    n = int(valid.sum())
    if n == 0:
        return np.zeros(cut.size)
    centred = np.where(valid, values - np.mean(values[valid]), 0.0)
    cnt = np.cumsum(valid)[cut].astype(np.float64)
    s = np.cumsum(centred)[cut]
    ss = np.cumsum(centred * centred)[cut]
    s_tot, ss_tot = centred.sum(), np.sum(centred * centred)
    parent = variance_from_moments(np.float64(n), s_tot, ss_tot)
    var_left = variance_from_moments(cnt, s, ss)
    var_right = variance_from_moments(n - cnt, s_tot - s, ss_tot - ss)
    return parent - (cnt / n) * var_left - ((n - cnt) / n) * var_right


def score_thresholds(
    values: np.ndarray,
    node: NodeSamples,
    weights: SourceWeights,
    roots: RootImpurities,
) -> ThresholdScores:
    """Joint gain of every midpoint threshold of one projected feature at a node."""
    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    cut, thresholds = midpoint_thresholds(sorted_values)
    if cut.size == 0:
        return ThresholdScores(thresholds, np.zeros(0))

    n = len(node)
    pseudo = node.is_pseudo[order]
    p_left = np.cumsum(pseudo)[cut].astype(np.float64)
    n_left = (cut + 1).astype(np.float64)
    r_left = n_left - p_left
    p_tot = float(pseudo.sum())
    r_tot = n - p_tot
    left = np.stack([r_left, p_left], axis=1)
    right = np.stack([r_tot - r_left, p_tot - p_left], axis=1)
    dv = gini_rows(np.array([r_tot, p_tot])) - (n_left / n) * gini_rows(left) - ((n - n_left) / n) * gini_rows(right)
    gains = weights.alpha_v * (dv / roots.visual if roots.visual > 0 else np.zeros_like(dv))

    for alpha, codes, k, root in zip(weights.alpha_aux, node.aux, node.n_categories, roots.aux):
        if alpha <= 0 or root <= 0:
            continue
        sorted_codes = codes[order]
        if k > 0:
            delta = _cumulative_categorical_gain(sorted_codes, k, cut)
        else:
            delta = _cumulative_continuous_gain(sorted_codes, cut)
        gains = gains + alpha * delta / root

    if weights.alpha_t > 0 and roots.temporal > 0:
        gains = gains + weights.alpha_t * _cumulative_continuous_gain(node.time[order], cut) / roots.temporal

    return ThresholdScores(thresholds, gains)
