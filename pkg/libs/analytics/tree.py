"""
MSC-tree growth and routing.

A tree is grown greedily on a bag of augmented rows: at every node m_try
features are sampled without replacement, every midpoint threshold is scored
with the joint gain, and the best (feature, threshold) is kept. Nodes are
stored in a flat list (preorder, left child first) with child indices.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from libs.analytics.augmentation import AugmentedSet
from libs.analytics.gain import (
    GAIN_EPS,
    NodeSamples,
    RootImpurities,
    adapt_weights,
    gain_terms,
    root_impurities,
    score_thresholds,
)
from libs.analytics.node_correlation import node_feature_correlation, node_visual_aux_correlation
from libs.analytics.sources import MultiSourceDataset, SourceKind, SourceWeights, missing_fractions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitParams:
    feature_index: int
    threshold: float
    second_index: Optional[int] = None
    coefficients: Optional[Tuple[float, float]] = None

    @property
    def oblique(self) -> bool:
        return self.second_index is not None

    def project(self, X: np.ndarray) -> np.ndarray:
        if not self.oblique:
            return X[:, self.feature_index]
        c1, c2 = self.coefficients
        return c1 * X[:, self.feature_index] + c2 * X[:, self.second_index]


@dataclass
class TreeNode:
    depth: int
    n_rows: int
    split: Optional[SplitParams] = None
    left: int = -1
    right: int = -1
    members: Tuple[int, ...] = ()
    oob: Tuple[int, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    @property
    def all_members(self) -> Tuple[int, ...]:
        return tuple(sorted(self.members + self.oob))


@dataclass
class CorrelationLog:
    """Per-tree sums and co-occurrence counts of node-level correlations."""
    features: Dict[Tuple[int, int], List[float]] = field(default_factory=dict)
    aux: Dict[Tuple[int, int], List[float]] = field(default_factory=dict)

    @staticmethod
    def _add(table, key, value):
        entry = table.setdefault(key, [0.0, 0])
        entry[0] += value
        entry[1] += 1

    def add_feature(self, nu: int, tau: int, value: float):
        self._add(self.features, (nu, tau), value)

    def add_aux(self, nu: int, source: int, value: float):
        self._add(self.aux, (nu, source), value)

    def to_dict(self) -> dict:
        return {
            "features": [[a, b, s, c] for (a, b), (s, c) in sorted(self.features.items())],
            "aux": [[a, b, s, c] for (a, b), (s, c) in sorted(self.aux.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorrelationLog":
        log = cls()
        for a, b, s, c in data.get("features", []):
            log.features[(int(a), int(b))] = [float(s), int(c)]
        for a, b, s, c in data.get("aux", []):
            log.aux[(int(a), int(b))] = [float(s), int(c)]
        return log


class Tree:
    """Flat-array binary tree with per-leaf REAL member lists."""

    def __init__(
        self,
        nodes: List[TreeNode],
        weights: SourceWeights,
        roots: RootImpurities,
        correlation: Optional[CorrelationLog] = None,
    ):
        self.nodes = nodes
        self.weights = weights
        self.roots = roots
        self.correlation = correlation or CorrelationLog()
        self._compile()

    def _compile(self):
        n = len(self.nodes)
        self._feature = np.full(n, -1, dtype=np.int64)
        self._second = np.full(n, 0, dtype=np.int64)
        self._c1 = np.ones(n)
        self._c2 = np.zeros(n)
        self._threshold = np.zeros(n)
        self._left = np.full(n, -1, dtype=np.int64)
        self._right = np.full(n, -1, dtype=np.int64)
        for i, node in enumerate(self.nodes):
            if node.is_leaf:
                continue
            s = node.split
            self._feature[i] = s.feature_index
            self._threshold[i] = s.threshold
            self._left[i], self._right[i] = node.left, node.right
            if s.oblique:
                self._second[i] = s.second_index
                self._c1[i], self._c2[i] = s.coefficients
            else:
                self._second[i] = s.feature_index

    @property
    def fan_in(self) -> int:
        """Sum over split nodes of (|S_j| - 1)."""
        return int(sum(node.n_rows - 1 for node in self.nodes if not node.is_leaf))

    @property
    def leaf_ids(self) -> List[int]:
        return [i for i, node in enumerate(self.nodes) if node.is_leaf]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id reached by every row of X (x[f] < threshold goes left)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            active = np.nonzero(self._feature[node] >= 0)[0]
            if active.size == 0:
                return node
            cur = node[active]
            f, g = self._feature[cur], self._second[cur]
            if np.any(self._c2[cur] != 0):
                value = self._c1[cur] * X[active, f] + self._c2[cur] * X[active, g]
            else:
                value = X[active, f]
            go_left = value < self._threshold[cur]
            node[active] = np.where(go_left, self._left[cur], self._right[cur])

    def trace_leaf(self, x: np.ndarray) -> TreeNode:
        return self.nodes[int(self.apply(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])]

    def attach_out_of_bag(self, X: np.ndarray):
        """Route every training sample and record those not already in-bag members of their leaf."""
        routed = self.apply(X)
        by_leaf: Dict[int, List[int]] = {}
        for sample, leaf in enumerate(routed):
            by_leaf.setdefault(int(leaf), []).append(sample)
        for leaf, samples in by_leaf.items():
            node = self.nodes[leaf]
            in_bag = set(node.members)
            node.oob = tuple(s for s in samples if s not in in_bag)

    def depth_histogram(self) -> Dict[int, int]:
        """Root-to-leaf depth of the in-bag REAL samples."""
        hist = Counter()
        for node in self.nodes:
            if node.is_leaf and node.members:
                hist[node.depth] += len(node.members)
        return dict(sorted(hist.items()))

    def to_dict(self) -> dict:
        nodes = []
        for node in self.nodes:
            entry = {"depth": node.depth, "n_rows": node.n_rows}
            if node.is_leaf:
                entry["members"] = list(node.members)
                entry["oob"] = list(node.oob)
            else:
                s = node.split
                entry.update(feature=s.feature_index, threshold=s.threshold, left=node.left, right=node.right)
                if s.oblique:
                    entry["second"] = s.second_index
                    entry["coefficients"] = list(s.coefficients)
            nodes.append(entry)
        return {
            "nodes": nodes,
            "fan_in": self.fan_in,
            "weights": self.weights.as_list(),
            "roots": {"visual": self.roots.visual, "aux": list(self.roots.aux), "temporal": self.roots.temporal},
            "correlation": self.correlation.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Tree":
        nodes = []
        for entry in data["nodes"]:
            if "feature" in entry:
                coeffs = entry.get("coefficients")
                split = SplitParams(
                    feature_index=int(entry["feature"]),
                    threshold=float(entry["threshold"]),
                    second_index=entry.get("second"),
                    coefficients=tuple(coeffs) if coeffs is not None else None,
                )
                nodes.append(TreeNode(entry["depth"], entry["n_rows"], split, entry["left"], entry["right"]))
            else:
                nodes.append(TreeNode(
                    entry["depth"], entry["n_rows"],
                    members=tuple(entry["members"]), oob=tuple(entry["oob"]),
                ))
        roots = data["roots"]
        return cls(
            nodes,
            SourceWeights.from_list(data["weights"]),
            RootImpurities(roots["visual"], tuple(roots["aux"]), roots["temporal"]),
            CorrelationLog.from_dict(data.get("correlation", {})),
        )


def bag_node_samples(dataset: MultiSourceDataset, augmented: AugmentedSet, bag: np.ndarray) -> NodeSamples:
    """Auxiliary values and time positions for the bag rows; pseudo rows are missing everywhere."""
    origin = augmented.origin_index[bag]
    real = origin >= 0
    safe = np.where(real, origin, 0)
    aux, n_categories = [], []
    for col in dataset.aux:
        if col.descriptor.kind == SourceKind.CATEGORICAL:
            aux.append(np.where(real, col.values[safe], -1).astype(np.int64))
            n_categories.append(col.descriptor.n_categories)
        else:
            aux.append(np.where(real, col.values[safe], np.nan))
            n_categories.append(0)
    time = np.where(real, safe.astype(np.float64), np.nan)
    return NodeSamples(~real, tuple(aux), tuple(n_categories), time)


def tree_weights(base: SourceWeights, dataset: MultiSourceDataset, real_origins: np.ndarray, roots: RootImpurities) -> SourceWeights:
    """Missing-fraction adapted weights; a source constant over the bag counts as fully missing."""
    if base.m == 0:
        return base
    if real_origins.size:
        deltas = missing_fractions(dataset, real_origins)
    else:
        deltas = np.ones(base.m)
    deltas = np.where(np.asarray(roots.aux) > 0, deltas, 1.0)
    return adapt_weights(base, deltas)


class TreeBuilder:
    """Grows one tree from a bag of augmented rows."""

    def __init__(self, m_try: int, phi: int, oblique: bool = False, record_correlation: bool = True):
        self.m_try = m_try
        self.phi = phi
        self.oblique = oblique
        self.record_correlation = record_correlation

    def _candidates(self, rows: np.ndarray, rng: np.random.Generator) -> List[SplitParams]:
        d = rows.shape[1]
        if not self.oblique or d < 2:
            features = np.sort(rng.choice(d, size=self.m_try, replace=False))
            return [SplitParams(int(f), 0.0) for f in features]
        out = []
        for _ in range(self.m_try):
            f, g = np.sort(rng.choice(d, size=2, replace=False))
            c1, c2 = rng.normal(size=2)
            out.append(SplitParams(int(f), 0.0, int(g), (float(c1), float(c2))))
        return out

    def _best_split(self, rows, node_data, weights, roots, rng):
        best, best_gain = None, -np.inf
        per_feature = []
        for cand in self._candidates(rows, rng):
            values = cand.project(rows)
            scores = score_thresholds(values, node_data, weights, roots)
            if scores.empty:
                continue
            _, thr, gain = scores.best()
            split = SplitParams(cand.feature_index, thr, cand.second_index, cand.coefficients)
            per_feature.append(split)
            if gain > best_gain:
                best, best_gain = split, gain
        return best, best_gain, per_feature

    def _log_correlation(self, log: CorrelationLog, best: SplitParams, go_left, rows, node_data, roots, alternatives):
        for alt in alternatives:
            if alt.feature_index == best.feature_index:
                continue
            left_tau = alt.project(rows) < alt.threshold
            log.add_feature(best.feature_index, alt.feature_index, node_feature_correlation(go_left, left_tau))
        _, aux_terms, _ = gain_terms(go_left, node_data, roots)
        for j, codes in enumerate(node_data.aux):
            support = np.any(codes >= 0) if node_data.n_categories[j] > 0 else np.any(~np.isnan(codes))
            if not support:
                continue
            value = node_visual_aux_correlation(aux_terms[j] * roots.aux[j], roots.aux[j])
            if value is not None:
                log.add_aux(best.feature_index, j, value)

    def grow(
        self,
        dataset: MultiSourceDataset,
        augmented: AugmentedSet,
        bag: np.ndarray,
        base_weights: SourceWeights,
        rng: np.random.Generator,
    ) -> Tree:
        bag = np.asarray(bag, dtype=np.int64)
        if bag.size == 0:
            raise ValueError("bag must be nonempty")
        rows_all = augmented.rows[bag]
        data_all = bag_node_samples(dataset, augmented, bag)
        origin_all = augmented.origin_index[bag]

        roots = root_impurities(data_all)
        weights = tree_weights(base_weights, dataset, origin_all[origin_all >= 0], roots)
        log = CorrelationLog()

        nodes: List[TreeNode] = []
        # (row positions within the bag, depth, parent id, is_left)
        stack = [(np.arange(bag.size), 0, -1, True)]
        while stack:
            idx, depth, parent, is_left = stack.pop()
            node_id = len(nodes)
            node = TreeNode(depth=depth, n_rows=int(idx.size))
            nodes.append(node)
            if parent >= 0:
                if is_left:
                    nodes[parent].left = node_id
                else:
                    nodes[parent].right = node_id

            rows = rows_all[idx]
            split = None
            if idx.size >= self.phi and not np.all(rows == rows[0]):
                node_data = data_all.take(idx)
                best, gain, alternatives = self._best_split(rows, node_data, weights, roots, rng)
                if best is not None and gain > GAIN_EPS:
                    split = best
                    go_left = best.project(rows) < best.threshold
                    if self.record_correlation and not best.oblique:
                        self._log_correlation(log, best, go_left, rows, node_data, roots, alternatives)

            if split is None:
                origins = origin_all[idx]
                node.members = tuple(int(o) for o in np.unique(origins[origins >= 0]))
                continue

            node.split = split
            stack.append((idx[~go_left], depth + 1, node_id, False))
            stack.append((idx[go_left], depth + 1, node_id, True))

        tree = Tree(nodes, weights, roots, log)
        logger.debug(f"Grew tree with {len(nodes)} nodes, fan-in {tree.fan_in}")
        return tree


def train_tree(
    dataset: MultiSourceDataset,
    augmented: AugmentedSet,
    bag: np.ndarray,
    base_weights: SourceWeights,
    rng: np.random.Generator,
    m_try: int,
    phi: int = 2,
    oblique: bool = False,
    record_correlation: bool = True,
) -> Tree:
    """Grow one tree on `bag` and attach out-of-bag training samples to its leaves."""
    builder = TreeBuilder(m_try=m_try, phi=phi, oblique=oblique, record_correlation=record_correlation)
    tree = builder.grow(dataset, augmented, bag, base_weights, rng)
    tree.attach_out_of_bag(dataset.main)
    return tree
