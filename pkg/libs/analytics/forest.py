"""
MSC forest: an ensemble of independently grown MSC-trees.

Every tree draws from its own stream spawned off SeedSequence(config.seed), so
the trained forest does not depend on how trees are scheduled across workers.
"""
import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
from joblib import Parallel, delayed

from libs.analytics.augmentation import AugmentedSet, augment
from libs.analytics.sources import MultiSourceDataset, SourceWeights
from libs.analytics.train_config import TrainConfig
from libs.analytics.tree import Tree, train_tree

logger = logging.getLogger(__name__)


@dataclass
class FanInStats:
    per_tree: List[int]
    phi_star: float
    depth_histogram: Dict[int, int]

    def to_dict(self) -> dict:
        return {
            "per_tree": self.per_tree,
            "phi_star": self.phi_star,
            "depth_histogram": {str(k): v for k, v in self.depth_histogram.items()},
        }


class MscForest:
    """Trained forest: trees plus the configuration and base weights they were grown with."""

    def __init__(self, trees: List[Tree], config: TrainConfig, base_weights: SourceWeights, m_try: int, n_features: int):
        self.trees = trees
        self.config = config
        self.base_weights = base_weights
        self.m_try = m_try
        self.n_features = n_features

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """(N, T) leaf ids of every row in every tree."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.stack([tree.apply(X) for tree in self.trees], axis=1)

    def to_dict(self) -> dict:
        return {
            "config": self.config.model_identity(),
            "base_weights": self.base_weights.as_list(),
            "m_try": self.m_try,
            "n_features": self.n_features,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MscForest":
        return cls(
            trees=[Tree.from_dict(t) for t in data["trees"]],
            config=TrainConfig.model_validate(data["config"]),
            base_weights=SourceWeights.from_list(data["base_weights"]),
            m_try=int(data["m_try"]),
            n_features=int(data["n_features"]),
        )


def _grow_one(dataset, base_weights, config, m_try, seed_seq, shared: Optional[AugmentedSet]) -> Tree:
    rng = np.random.default_rng(seed_seq)
    augmented = shared if shared is not None else augment(dataset.main, rng)
    n_rows = augmented.rows.shape[0]
    bag = rng.integers(0, n_rows, size=n_rows)
    return train_tree(
        dataset,
        augmented,
        bag,
        base_weights,
        rng,
        m_try=m_try,
        phi=config.phi,
        oblique=config.oblique,
        record_correlation=config.record_correlation,
    )


def train_forest(dataset: MultiSourceDataset, config: TrainConfig, workers: int = 1) -> MscForest:
    """
    Train config.T_clust trees. The result is bit-identical for a fixed seed
    regardless of `workers`.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    m_try = config.resolve_m_try(dataset.n_features)
    base_weights = config.resolve_weights(dataset)

    root = np.random.SeedSequence(config.seed)
    children = root.spawn(config.T_clust + 1)
    shared = None
    if config.shared_pseudo:
        shared = augment(dataset.main, np.random.default_rng(children[-1]))

    logger.info(
        f"Training {config.T_clust} trees (N={dataset.n_samples}, d={dataset.n_features}, "
        f"m={dataset.n_sources}, m_try={m_try}, weights={base_weights.as_list()}, workers={workers})"
    )
    start = time.perf_counter()
    trees = Parallel(n_jobs=workers)(
        delayed(_grow_one)(dataset, base_weights, config, m_try, children[t], shared)
        for t in range(config.T_clust)
    )
    elapsed = time.perf_counter() - start
    forest = MscForest(list(trees), config, base_weights, m_try, dataset.n_features)
    for t, tree in enumerate(forest.trees):
        logger.debug(f"tree {t}: fan-in {tree.fan_in}, {len(tree.leaf_ids)} leaves")
    logger.info(f"Trained forest in {elapsed:.2f}s, phi* = {fan_in_stats(forest).phi_star:.1f}")
    return forest


def fan_in_stats(forest: MscForest) -> FanInStats:
    """Per-tree fan-in, its forest mean and the depth profile of in-bag REAL samples."""
    per_tree = [tree.fan_in for tree in forest.trees]
    hist: Dict[int, int] = {}
    for tree in forest.trees:
        for depth, count in tree.depth_histogram().items():
            hist[depth] = hist.get(depth, 0) + count
    phi_star = float(np.mean(per_tree)) if per_tree else 0.0
    return FanInStats(per_tree, phi_star, dict(sorted(hist.items())))
