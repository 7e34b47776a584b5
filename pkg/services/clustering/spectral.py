"""
Spectral clustering on the normalised forest affinity, and the per-cluster
model (centroids plus auxiliary tag profiles) used for inference.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from sklearn.cluster import KMeans

from libs.analytics.sources import MultiSourceDataset, SourceDescriptor, SourceKind
from libs.errors import ConfigError, DatasetValidationError, SpectralError

logger = logging.getLogger(__name__)

EIGENGAP_TIE_TOL = 1e-10
HISTOGRAM_BINS = 10


def _eigh(S: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix, eigenvalues sorted descending."""
    try:
        w, v = scipy.linalg.eigh(S)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as e:
        raise SpectralError(f"Eigen-decomposition failed: {e}") from e
    return w[::-1], v[:, ::-1]


def estimate_num_clusters(S: np.ndarray, k_max: int = 30) -> int:
    """
    K maximising the eigengap lambda_K - lambda_{K+1} over K in [2, k_max]
    (eigenvalues descending); near-ties go to the smaller K.
    """
    if k_max < 2:
        raise ConfigError(f"k_max must be >= 2, got {k_max}")
    n = S.shape[0]
    hi = min(k_max, n - 1)
    if hi < 2:
        return min(2, n)
    w, _ = _eigh(S)
    gaps = w[1:hi] - w[2:hi + 1]  # gaps[i] belongs to K = i + 2
    best = float(np.max(gaps))
    K = int(np.nonzero(gaps >= best - EIGENGAP_TIE_TOL)[0][0]) + 2
    logger.info(f"Eigengap estimate K={K} (gap {best:.4g}, top eigenvalues {np.round(w[:min(6, n)], 4).tolist()})")
    return K


def farthest_first(points: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """K seed rows: a random first row, then repeatedly the row farthest from the chosen ones."""
    chosen = [int(rng.integers(points.shape[0]))]
    dist = np.linalg.norm(points - points[chosen[0]], axis=1)
    while len(chosen) < K:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1))
    return np.asarray(chosen)


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel so cluster ids appear in order of first occurrence: 0, 1, 2, ..."""
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(order.size, dtype=np.int64)
    remap[order] = np.arange(order.size)
    _, inverse = np.unique(labels, return_inverse=True)
    return remap[inverse]


def spectral_embedding(S: np.ndarray, K: int) -> np.ndarray:
    _, v = _eigh(S)
    emb = v[:, :K]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    return np.divide(emb, norms, out=np.zeros_like(emb), where=norms > 0)


def spectral_cluster(S: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """Row-normalised top-K eigenvectors partitioned by one seeded k-means run."""
    n = S.shape[0]
    if not 2 <= K <= n:
        raise ConfigError(f"K must lie in [2, {n}], got {K}")
    emb = spectral_embedding(S, K)
    seeds = farthest_first(emb, K, rng)
    km = KMeans(n_clusters=K, init=emb[seeds], n_init=1, random_state=0)
    labels = canonical_labels(km.fit_predict(emb))
    logger.info(f"Spectral clustering: {np.unique(labels).size} clusters over {n} samples")
    return labels


@dataclass
class SourceProfile:
    """p(y | c) for one auxiliary source: categorical probabilities or a histogram over fixed bins."""
    descriptor: SourceDescriptor
    probs: np.ndarray                          # (K, C) or (K, B)
    fallback: np.ndarray                       # (K,) uniform profile used (no observed values)
    bin_edges: Optional[np.ndarray] = None     # (B + 1,) continuous only
    means: Optional[np.ndarray] = None         # (K,) continuous only

    @property
    def categorical(self) -> bool:
        return self.descriptor.kind == SourceKind.CATEGORICAL

    def bin_centres(self) -> np.ndarray:
        return (self.bin_edges[:-1] + self.bin_edges[1:]) / 2.0

    def to_dict(self) -> dict:
        data = {
            "descriptor": self.descriptor.model_dump(mode="json"),
            "probs": self.probs.tolist(),
            "fallback": self.fallback.tolist(),
        }
        if not self.categorical:
            data["bin_edges"] = self.bin_edges.tolist()
            data["means"] = self.means.tolist()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SourceProfile":
        return cls(
            descriptor=SourceDescriptor.model_validate(data["descriptor"]),
            probs=np.asarray(data["probs"], dtype=np.float64),
            fallback=np.asarray(data["fallback"], dtype=bool),
            bin_edges=np.asarray(data["bin_edges"]) if "bin_edges" in data else None,
            means=np.asarray(data["means"]) if "means" in data else None,
        )


@dataclass
class ClusterModel:
    labels: np.ndarray        # (N,)
    centroids: np.ndarray     # (K, d)
    sizes: np.ndarray         # (K,)
    profiles: List[SourceProfile] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    def profile(self, name: str) -> SourceProfile:
        for p in self.profiles:
            if p.descriptor.name == name:
                return p
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "labels": self.labels.tolist(),
            "centroids": self.centroids.tolist(),
            "sizes": self.sizes.tolist(),
            "profiles": [p.to_dict() for p in self.profiles],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClusterModel":
        return cls(
            labels=np.asarray(data["labels"], dtype=np.int64),
            centroids=np.asarray(data["centroids"], dtype=np.float64),
            sizes=np.asarray(data["sizes"], dtype=np.int64),
            profiles=[SourceProfile.from_dict(p) for p in data["profiles"]],
        )


def _histogram_edges(values: np.ndarray, bins: int) -> np.ndarray:
    observed = values[~np.isnan(values)]
    if observed.size == 0:
        return np.linspace(0.0, 1.0, bins + 1)
    lo, hi = float(observed.min()), float(observed.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bins + 1)


def build_cluster_model(dataset: MultiSourceDataset, labels: Sequence[int], bins: int = HISTOGRAM_BINS) -> ClusterModel:
    """Centroids, sizes and per-source tag profiles of a labelled training set."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (dataset.n_samples,):
        raise DatasetValidationError(f"labels must cover all {dataset.n_samples} samples")
    if labels.min() < 0:
        raise DatasetValidationError("cluster labels must be nonnegative")
    K = int(labels.max()) + 1
    sizes = np.bincount(labels, minlength=K)
    if np.any(sizes == 0):
        raise DatasetValidationError(f"cluster ids must be contiguous; empty clusters {np.nonzero(sizes == 0)[0].tolist()}")
    centroids = np.vstack([dataset.main[labels == c].mean(axis=0) for c in range(K)])

    profiles = []
    for col in dataset.aux:
        fallback = np.zeros(K, dtype=bool)
        if col.descriptor.kind == SourceKind.CATEGORICAL:
            C = col.descriptor.n_categories
            probs = np.zeros((K, C))
            for c in range(K):
                codes = col.values[(labels == c) & ~col.missing]
                if codes.size == 0:
                    probs[c] = 1.0 / C
                    fallback[c] = True
                else:
                    probs[c] = np.bincount(codes, minlength=C) / codes.size
            profiles.append(SourceProfile(col.descriptor, probs, fallback))
        else:
            edges = _histogram_edges(col.values, bins)
            observed_all = col.values[~col.missing]
            global_mean = float(observed_all.mean()) if observed_all.size else 0.0
            probs = np.zeros((K, bins))
            means = np.zeros(K)
            for c in range(K):
                values = col.values[(labels == c) & ~col.missing]
                if values.size == 0:
                    probs[c] = 1.0 / bins
                    means[c] = global_mean
                    fallback[c] = True
                else:
                    hist, _ = np.histogram(values, bins=edges)
                    probs[c] = hist / values.size
                    means[c] = float(values.mean())
            profiles.append(SourceProfile(col.descriptor, probs, fallback, edges, means))
        if fallback.any():
            logger.warning(
                f"Source '{col.name}': uniform profile used for clusters {np.nonzero(fallback)[0].tolist()} (no observed values)"
            )
    return ClusterModel(labels, centroids, sizes, profiles)
