"""
Training pipeline: forest -> affinity -> k-NN graph -> spectral clustering -> cluster model.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from libs.analytics.forest import MscForest, fan_in_stats, train_forest
from libs.analytics.sources import MultiSourceDataset
from libs.analytics.train_config import TrainConfig
from services.clustering.affinity import (
    AffinityMatrix,
    default_knn_k,
    forest_affinity,
    knn_sparsify,
    normalise,
    with_self_affinity,
)
from services.clustering.spectral import ClusterModel, build_cluster_model, estimate_num_clusters, spectral_cluster

logger = logging.getLogger(__name__)


@dataclass
class ClusteringParams:
    knn_k: Optional[int] = None
    k_max: int = 30
    n_clusters: Optional[int] = None  # fixed K instead of the eigengap estimate


@dataclass
class TrainedModel:
    forest: MscForest
    clusters: ClusterModel
    params: ClusteringParams
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return self.clusters.n_clusters


def cluster_graph(forest: MscForest, X: np.ndarray, knn_k: Optional[int], workers: int = 1) -> AffinityMatrix:
    """Sparsified affinity graph over X (no self loops)."""
    A = forest_affinity(forest, X, workers=workers)
    k = knn_k if knn_k is not None else default_knn_k(A.n_samples)
    return knn_sparsify(A, k)


def cluster_samples(forest: MscForest, X: np.ndarray, params: ClusteringParams, seed: int, workers: int = 1) -> np.ndarray:
    graph = with_self_affinity(cluster_graph(forest, X, params.knn_k, workers))
    S = normalise(graph)
    K = params.n_clusters or estimate_num_clusters(S, params.k_max)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    return spectral_cluster(S, K, rng)


def train_model(
    dataset: MultiSourceDataset,
    config: TrainConfig,
    params: Optional[ClusteringParams] = None,
    workers: int = 1,
) -> TrainedModel:
    params = params or ClusteringParams()
    timings = {}

    start = time.perf_counter()
    forest = train_forest(dataset, config, workers=workers)
    timings["forest"] = time.perf_counter() - start

    start = time.perf_counter()
    labels = cluster_samples(forest, dataset.main, params, config.seed, workers)
    timings["spectral"] = time.perf_counter() - start

    clusters = build_cluster_model(dataset, labels)
    logger.info(
        f"Trained model: K={clusters.n_clusters}, sizes={clusters.sizes.tolist()}, "
        f"phi*={fan_in_stats(forest).phi_star:.1f}"
    )
    return TrainedModel(forest, clusters, params, timings)
