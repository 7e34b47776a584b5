"""
Planted multi-source datasets with known latent clusters.

Main features are isotropic Gaussian blobs centred on scaled corners of the
first ceil(log2 K) axes (the remaining axes are pure noise);
categorical sources copy the latent label with a configurable alignment
probability; continuous sources shift their mean with the label.
"""
import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import Field, model_validator

from apps.cli.schemas_base import StrictModel
from libs.analytics.sources import AuxColumn, MultiSourceDataset, SourceDescriptor, SourceKind
from libs.errors import ConfigError
from services.data.io import save_dataset

logger = logging.getLogger(__name__)

CLIP_SECONDS = 20.0


class SynthConfig(StrictModel):
    n_clusters: int = Field(default=4, ge=2)
    samples_per_cluster: int = Field(default=125, ge=1)
    d: int = Field(default=20, ge=1)
    blob_separation: float = Field(default=8.0, ge=0.0)
    blob_sigma: float = Field(default=1.0, ge=0.0)
    n_categorical: int = Field(default=1, ge=0)
    alignment: float = Field(default=0.9, le=1.0)
    n_continuous: int = Field(default=0, ge=0)
    continuous_shift: float = 1.0
    continuous_sigma: float = Field(default=0.1, ge=0.0)
    missing_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    temporal_blocks: bool = True
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.alignment < 1.0 / self.n_clusters:
            raise ValueError(f"alignment must lie in [1/K, 1], got {self.alignment}")
        if self.d < corner_bits(self.n_clusters):
            raise ValueError(f"d={self.d} is too small to place {self.n_clusters} distinct orthant corners")
        return self

    @property
    def n_samples(self) -> int:
        return self.n_clusters * self.samples_per_cluster


def corner_bits(n_clusters: int) -> int:
    return max(1, math.ceil(math.log2(n_clusters)))


def cluster_centres(config: SynthConfig) -> np.ndarray:
    """Centre of cluster c: separation times the bits of c on the first corner_bits axes, zero elsewhere."""
    bits = corner_bits(config.n_clusters)
    c = np.arange(config.n_clusters)[:, None]
    j = np.arange(config.d)[None, :]
    corners = np.where(j < bits, (c >> np.minimum(j, bits - 1)) & 1, 0)
    return config.blob_separation * corners.astype(np.float64)


def generate(config: SynthConfig) -> Tuple[MultiSourceDataset, np.ndarray]:
    """Planted dataset and its ground-truth labels, deterministic per seed."""
    rng = np.random.default_rng(config.seed)
    K, n = config.n_clusters, config.n_samples

    labels = np.repeat(np.arange(K), config.samples_per_cluster)
    if not config.temporal_blocks:
        labels = labels[rng.permutation(n)]

    centres = cluster_centres(config)
    main = centres[labels] + config.blob_sigma * rng.standard_normal((n, config.d))

    aux = []
    vocabulary = tuple(f"c{k}" for k in range(K))
    for s in range(config.n_categorical):
        keep = rng.random(n) < config.alignment
        # uniform over the other K-1 categories
        other = (labels + rng.integers(1, K, size=n)) % K
        codes = np.where(keep, labels, other).astype(np.int64)
        codes[rng.random(n) < config.missing_fraction] = -1
        descriptor = SourceDescriptor(name=f"cat{s}", kind=SourceKind.CATEGORICAL, vocabulary=vocabulary)
        aux.append(AuxColumn(descriptor, codes))
    for s in range(config.n_continuous):
        values = config.continuous_shift * labels + config.continuous_sigma * rng.standard_normal(n)
        values[rng.random(n) < config.missing_fraction] = np.nan
        aux.append(AuxColumn(SourceDescriptor(name=f"num{s}", kind=SourceKind.CONTINUOUS), values))

    dataset = MultiSourceDataset(
        main=main,
        aux=tuple(aux),
        time=CLIP_SECONDS * np.arange(n, dtype=np.float64),
        sample_ids=tuple(f"clip{i:05d}" for i in range(n)),
    )
    logger.info(f"Generated synthetic dataset: K={K}, N={n}, d={config.d}, m={dataset.n_sources}")
    return dataset, labels


def inject_missing(dataset: MultiSourceDataset, rho: float, rng: np.random.Generator) -> MultiSourceDataset:
    """
    Blank a random nonempty subset of auxiliary sources on round(rho * N)
    randomly chosen samples (rho in [0, 1]).
    """
    if not 0.0 <= rho <= 1.0:
        raise ConfigError(f"rho must lie in [0, 1], got {rho}")
    m = dataset.n_sources
    if m == 0 or rho == 0:
        return dataset
    n = dataset.n_samples
    chosen = np.sort(rng.choice(n, size=int(round(rho * n)), replace=False))
    blank = np.zeros((n, m), dtype=bool)
    for i in chosen:
        k = int(rng.integers(1, m + 1))
        blank[i, rng.choice(m, size=k, replace=False)] = True

    columns = []
    for j, col in enumerate(dataset.aux):
        values = col.values.copy()
        values[blank[:, j]] = -1 if col.descriptor.kind == SourceKind.CATEGORICAL else np.nan
        columns.append(AuxColumn(col.descriptor, values))
    logger.info(f"Injected missing auxiliary data on {chosen.size}/{n} samples")
    return MultiSourceDataset(dataset.main, tuple(columns), dataset.time, dataset.sample_ids, dataset.feature_names)


def holdout_split(dataset: MultiSourceDataset, fraction: float, rng: np.random.Generator):
    """
    Random split into (train, test, train_indices, test_indices) with
    round(fraction * N) test samples; both parts keep time order.
    """
    n = dataset.n_samples
    n_test = int(round(fraction * n))
    if not 2 <= n_test <= n - 2:
        raise ConfigError(f"holdout fraction {fraction} leaves fewer than 2 samples on one side (N={n})")
    test_idx = np.sort(rng.choice(n, size=n_test, replace=False))
    train_idx = np.setdiff1d(np.arange(n), test_idx)
    return dataset.subset(train_idx), dataset.subset(test_idx), train_idx, test_idx


def write_truth(dataset: MultiSourceDataset, labels: np.ndarray, path) -> Path:
    """sample_id, latent label and every categorical source's observed value (empty = missing)."""
    truth = pd.DataFrame({"sample_id": list(dataset.sample_ids), "label": labels})
    for col in dataset.aux:
        if col.descriptor.kind == SourceKind.CATEGORICAL:
            truth[col.name] = ["" if v is None else v for v in col.decoded()]
    truth.to_csv(path, index=False)
    return Path(path)


def write_synth(config: SynthConfig, directory, holdout: Optional[float] = None) -> List[Path]:
    """
    Write manifest(s), CSVs and truth file(s); returns the manifest paths.
    With `holdout`, a train and a test dataset are written instead of one.
    """
    dataset, labels = generate(config)
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "synth_config.json").write_text(config.model_dump_json(indent=2))
    if holdout is None:
        write_truth(dataset, labels, out / "truth.csv")
        return [save_dataset(dataset, out, name="synth")]

    rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])
    train, test, train_idx, test_idx = holdout_split(dataset, holdout, rng)
    write_truth(train, labels[train_idx], out / "truth_train.csv")
    write_truth(test, labels[test_idx], out / "truth_test.csv")
    return [save_dataset(train, out, name="train"), save_dataset(test, out, name="test")]
