"""
Forest affinity: the fraction of trees in which two samples share a leaf,
its k-NN sparsification and symmetric normalisation.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from libs.analytics.forest import MscForest
from libs.analytics.tree import Tree
from libs.errors import ConfigError, IsolatedSampleError

logger = logging.getLogger(__name__)

DENSE = "dense"
KNN = "knn-sparsified"


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    values: np.ndarray  # (N, N) symmetric, entries in [0, 1]
    kind: str = DENSE

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def degree(self) -> np.ndarray:
        return self.values.sum(axis=1)


def tree_affinity(tree: Tree, X: np.ndarray) -> np.ndarray:
    """0/1 co-leaf matrix of one tree."""
    leaves = tree.apply(X)
    return (leaves[:, None] == leaves[None, :]).astype(np.float64)


def _co_leaf_counts(trees, X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    counts = np.zeros((n, n), dtype=np.int64)
    for tree in trees:
        leaves = tree.apply(X)
        order = np.argsort(leaves, kind="stable")
        bounds = np.nonzero(np.diff(leaves[order]))[0] + 1
        for group in np.split(order, bounds):
            counts[np.ix_(group, group)] += 1
    return counts


def forest_affinity(forest: MscForest, X: np.ndarray, workers: int = 1) -> AffinityMatrix:
    """
    Mean of the tree-level co-leaf matrices, accumulated leaf by leaf as
    integer counts so the result does not depend on how trees are chunked.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n_chunks = max(1, min(workers, forest.n_trees))
    chunks = np.array_split(np.arange(forest.n_trees), n_chunks)
    parts = Parallel(n_jobs=workers)(
        delayed(_co_leaf_counts)([forest.trees[t] for t in chunk], X) for chunk in chunks
    )
    counts = np.sum(parts, axis=0)
    values = counts / forest.n_trees
    logger.info(f"Forest affinity over {X.shape[0]} samples: {np.count_nonzero(counts)} nonzero entries")
    return AffinityMatrix(values, DENSE)


def default_knn_k(n: int) -> int:
    return max(1, min(max(10, math.ceil(math.log2(n)) + 1), n - 1))


def knn_sparsify(A: AffinityMatrix, k: int) -> AffinityMatrix:
    """
    Keep (i, j) iff j is among i's k largest off-diagonal affinities or vice
    versa; entries tied with the k-th largest are kept, zero affinities are
    never edges. The diagonal is cleared.
    """
    n = A.n_samples
    if not 1 <= k < n:
        raise ConfigError(f"k must lie in [1, {n - 1}], got {k}")
    values = A.values.copy()
    np.fill_diagonal(values, -np.inf)
    kth = -np.partition(-values, k - 1, axis=1)[:, k - 1]
    keep = (values >= kth[:, None]) & (values > 0)
    keep = keep | keep.T
    out = np.where(keep, A.values, 0.0)
    np.fill_diagonal(out, 0.0)
    logger.debug(f"k-NN graph (k={k}): {int(keep.sum()) // 2} undirected edges")
    return AffinityMatrix(out, KNN)


def with_self_affinity(A: AffinityMatrix) -> AffinityMatrix:
    """Restore the unit diagonal (every sample shares its leaf with itself)."""
    values = A.values.copy()
    np.fill_diagonal(values, 1.0)
    return AffinityMatrix(values, A.kind)


def normalise(A: AffinityMatrix) -> np.ndarray:
    """S = D^-1/2 A D^-1/2."""
    degree = A.degree
    isolated = np.nonzero(degree <= 0)[0]
    if isolated.size:
        raise IsolatedSampleError(int(isolated[0]))
    inv_sqrt = 1.0 / np.sqrt(degree)
    S = A.values * inv_sqrt[:, None] * inv_sqrt[None, :]
    return (S + S.T) / 2.0


def export_coo_csv(A: AffinityMatrix, path) -> Path:
    """Nonzero upper-triangle entries as (i, j, value) rows."""
    i, j = np.nonzero(np.triu(A.values))
    frame = pd.DataFrame({"i": i, "j": j, "value": A.values[i, j]})
    path = Path(path)
    frame.to_csv(path, index=False)
    return path
