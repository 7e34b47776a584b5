"""
Cluster assignment and tag inference for unseen samples.

Every tree proposes the nearest centroid among the clusters represented in the
leaf the sample reaches; the forest takes the majority vote, and tag
distributions are the average of the per-tree clusters' profiles.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from libs.analytics.forest import MscForest
from libs.analytics.sources import MultiSourceDataset
from libs.analytics.tree import Tree
from services.clustering.spectral import ClusterModel, SourceProfile

logger = logging.getLogger(__name__)


@dataclass
class Assignment:
    sample_id: str
    cluster: int
    tree_clusters: np.ndarray   # (T,) nearest cluster chosen by each tree
    votes: Dict[int, int]

    @property
    def n_votes(self) -> int:
        return int(sum(self.votes.values()))


@dataclass
class SourceTag:
    distribution: List[float]
    index: int                      # argmax category / histogram bin
    label: Optional[str] = None     # categorical tag
    bin_centre: Optional[float] = None
    mean: Optional[float] = None

    def to_dict(self) -> dict:
        out = {"argmax": self.label if self.label is not None else self.index, "distribution": self.distribution}
        if self.bin_centre is not None:
            out["bin_centre"] = self.bin_centre
            out["mean"] = self.mean
        return out


@dataclass
class TagPrediction:
    sample_id: str
    tags: Dict[str, SourceTag] = field(default_factory=dict)


def leaf_cluster_mask(tree: Tree, model: ClusterModel) -> np.ndarray:
    """(n_nodes, K) mask of the clusters represented among each leaf's REAL training members."""
    mask = np.zeros((len(tree.nodes), model.n_clusters), dtype=bool)
    for i in tree.leaf_ids:
        members = tree.nodes[i].all_members
        if members:
            mask[i, np.unique(model.labels[list(members)])] = True
    return mask


def _nearest_restricted(dist: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise argmin of dist over mask; rows with an empty mask search all clusters."""
    empty = ~mask.any(axis=1)
    restricted = np.where(mask | empty[:, None], dist, np.inf)
    return np.argmin(restricted, axis=1)


def tree_nearest_clusters(tree: Tree, model: ClusterModel, X: np.ndarray, dist: Optional[np.ndarray] = None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if dist is None:
        dist = cdist(X, model.centroids)
    mask = leaf_cluster_mask(tree, model)
    return _nearest_restricted(dist, mask[tree.apply(X)])


def tree_nearest_cluster(tree: Tree, model: ClusterModel, x: np.ndarray) -> int:
    return int(tree_nearest_clusters(tree, model, np.asarray(x).reshape(1, -1))[0])


def forest_votes(forest: MscForest, model: ClusterModel, X: np.ndarray) -> np.ndarray:
    """(M, T) per-tree nearest clusters."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    dist = cdist(X, model.centroids)
    return np.stack([tree_nearest_clusters(t, model, X, dist) for t in forest.trees], axis=1)


def resolve_votes(tree_clusters: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Majority cluster per row; ties go to the larger training cluster, then the lower id."""
    K = sizes.size
    counts = np.stack([np.bincount(row, minlength=K) for row in tree_clusters])
    top = counts == counts.max(axis=1, keepdims=True)
    return np.argmax(np.where(top, sizes[None, :], -1), axis=1)


def assign_batch(
    forest: MscForest,
    model: ClusterModel,
    X: np.ndarray,
    sample_ids: Optional[Sequence[str]] = None,
) -> List[Assignment]:
    tree_clusters = forest_votes(forest, model, X)
    final = resolve_votes(tree_clusters, model.sizes)
    ids = list(sample_ids) if sample_ids is not None else [str(i) for i in range(len(final))]
    out = []
    for sid, c, row in zip(ids, final, tree_clusters):
        values, counts = np.unique(row, return_counts=True)
        out.append(Assignment(sid, int(c), row, {int(v): int(n) for v, n in zip(values, counts)}))
    return out


def assign_cluster(forest: MscForest, model: ClusterModel, x: np.ndarray, sample_id: str = "0") -> Assignment:
    return assign_batch(forest, model, np.asarray(x).reshape(1, -1), [sample_id])[0]


def assign_hard(model: ClusterModel, x: np.ndarray) -> int:
    """Globally nearest centroid (ties to the lower id)."""
    return int(np.argmin(cdist(np.asarray(x, dtype=np.float64).reshape(1, -1), model.centroids)[0]))


def _source_tag(profile: SourceProfile, weights: np.ndarray) -> SourceTag:
    """Tag from the cluster-weighted average of a source profile (weights sum to 1)."""
    dist = weights @ profile.probs
    dist = dist / dist.sum()
    idx = int(np.argmax(dist))
    if profile.categorical:
        return SourceTag(dist.tolist(), idx, label=profile.descriptor.vocabulary[idx])
    return SourceTag(
        dist.tolist(), idx,
        bin_centre=float(profile.bin_centres()[idx]),
        mean=float(weights @ profile.means),
    )


def tags_from_weights(model: ClusterModel, weights: np.ndarray, sample_id: str) -> TagPrediction:
    return TagPrediction(sample_id, {p.descriptor.name: _source_tag(p, weights) for p in model.profiles})


def infer_tags_batch(forest: MscForest, model: ClusterModel, assignments: Sequence[Assignment]) -> List[TagPrediction]:
    """p(y | x) = mean over trees of p(y | c_t)."""
    out = []
    for a in assignments:
        weights = np.bincount(a.tree_clusters, minlength=model.n_clusters) / a.tree_clusters.size
        out.append(tags_from_weights(model, weights, a.sample_id))
    return out


def infer_tags(forest: MscForest, model: ClusterModel, x: np.ndarray, sample_id: str = "0") -> TagPrediction:
    return infer_tags_batch(forest, model, [assign_cluster(forest, model, x, sample_id)])[0]


def infer_tags_hard(model: ClusterModel, x: np.ndarray, sample_id: str = "0") -> TagPrediction:
    """Tags of the single globally nearest cluster."""
    weights = np.zeros(model.n_clusters)
    weights[assign_hard(model, x)] = 1.0
    return tags_from_weights(model, weights, sample_id)


def nearest_neighbour_tags(dataset: MultiSourceDataset, X: np.ndarray) -> List[Dict[str, Optional[object]]]:
    """Auxiliary values of the nearest training sample (ties to the earlier sample); None when missing."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    nearest = np.argmin(cdist(X, dataset.main), axis=1)
    decoded = {col.name: col.decoded() for col in dataset.aux}
    return [{name: values[i] for name, values in decoded.items()} for i in nearest]
