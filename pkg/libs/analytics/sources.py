"""
Multi-source dataset representation.

A dataset couples one main (visual) feature matrix with m auxiliary sources,
each categorical or continuous and possibly missing per sample, plus a
monotone timestamp per sample.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from libs.errors import (
    DatasetValidationError,
    DuplicateIdError,
    NonFiniteFeatureError,
    VocabularyError,
    WeightsError,
)

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-12


class SourceKind(str, Enum):
    CATEGORICAL = "categorical"
    CONTINUOUS = "continuous"


class SourceDescriptor(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(min_length=1)
    kind: SourceKind
    vocabulary: Optional[Tuple[str, ...]] = None
    weight_hint: Optional[float] = Field(default=None, ge=0.0)

    @model_validator(mode="after")
    def _check_vocabulary(self):
        if self.kind == SourceKind.CATEGORICAL:
            if not self.vocabulary:
                raise ValueError(f"categorical source '{self.name}' needs a non-empty vocabulary")
            if len(set(self.vocabulary)) != len(self.vocabulary):
                raise ValueError(f"categorical source '{self.name}' has duplicate vocabulary entries")
        elif self.vocabulary is not None:
            raise ValueError(f"continuous source '{self.name}' must not declare a vocabulary")
        return self

    @property
    def n_categories(self) -> int:
        return len(self.vocabulary) if self.vocabulary else 0


@dataclass(frozen=True, eq=False)
class AuxColumn:
    """
    One auxiliary source over N samples.

    Categorical values are stored as integer category codes with -1 for missing;
    continuous values as floats with NaN for missing.
    """
    descriptor: SourceDescriptor
    values: np.ndarray

    @property
    def missing(self) -> np.ndarray:
        if self.descriptor.kind == SourceKind.CATEGORICAL:
            return self.values < 0
        return np.isnan(self.values)

    @property
    def name(self) -> str:
        return self.descriptor.name

    @classmethod
    def categorical(cls, descriptor: SourceDescriptor, labels: Sequence[Optional[str]]) -> "AuxColumn":
        """Encode string labels (None = missing) against the declared vocabulary."""
        index = {v: i for i, v in enumerate(descriptor.vocabulary)}
        codes = np.full(len(labels), -1, dtype=np.int64)
        for row, label in enumerate(labels):
            if label is None:
                continue
            if label not in index:
                raise VocabularyError(descriptor.name, row, label)
            codes[row] = index[label]
        return cls(descriptor, codes)

    def decoded(self) -> List[Optional[str]]:
        if self.descriptor.kind != SourceKind.CATEGORICAL:
            return [None if np.isnan(v) else float(v) for v in self.values]
        vocab = self.descriptor.vocabulary
        return [None if c < 0 else vocab[c] for c in self.values]


@dataclass(frozen=True, eq=False)
class MultiSourceDataset:
    main: np.ndarray
    aux: Tuple[AuxColumn, ...]
    time: np.ndarray
    sample_ids: Tuple[str, ...]
    feature_names: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        main = np.array(self.main, dtype=np.float64)
        if main.ndim != 2:
            raise DatasetValidationError(f"main matrix must be 2-D, got shape {main.shape}")
        n, d = main.shape
        if n < 2 or d < 1:
            raise DatasetValidationError(f"need N >= 2 and d >= 1, got N={n}, d={d}")
        bad = np.argwhere(~np.isfinite(main))
        if bad.size:
            row, col = bad[0]
            raise NonFiniteFeatureError(
                f"non-finite feature value at row {row}, column {col}", row=int(row), column=int(col)
            )

        time = np.array(self.time, dtype=np.float64)
        if time.shape != (n,):
            raise DatasetValidationError(f"time must have length {n}")
        if not np.all(np.isfinite(time)) or np.any(np.diff(time) < 0):
            raise DatasetValidationError("timestamps must be finite and sorted nondecreasing")

        ids = tuple(str(s) for s in self.sample_ids)
        if len(ids) != n:
            raise DatasetValidationError(f"sample_ids must have length {n}")
        if len(set(ids)) != n:
            seen = set()
            dup = next(s for s in ids if s in seen or seen.add(s))
            raise DuplicateIdError(f"duplicate sample id '{dup}'", sample_id=dup)

        names = [c.name for c in self.aux]
        if len(set(names)) != len(names):
            raise DatasetValidationError(f"auxiliary source names must be unique: {names}")
        for col in self.aux:
            if col.values.shape != (n,):
                raise DatasetValidationError(f"source '{col.name}' must have length {n}")
            if col.descriptor.kind == SourceKind.CATEGORICAL:
                over = np.nonzero(col.values >= col.descriptor.n_categories)[0]
                if over.size:
                    raise VocabularyError(col.name, int(over[0]), str(col.values[over[0]]))

        feature_names = tuple(self.feature_names) or tuple(f"f{j}" for j in range(d))
        if len(feature_names) != d:
            raise DatasetValidationError(f"feature_names must have length {d}")

        main.setflags(write=False)
        time.setflags(write=False)
        object.__setattr__(self, "main", main)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "sample_ids", ids)
        object.__setattr__(self, "aux", tuple(self.aux))
        object.__setattr__(self, "feature_names", feature_names)

    @property
    def n_samples(self) -> int:
        return self.main.shape[0]

    @property
    def n_features(self) -> int:
        return self.main.shape[1]

    @property
    def n_sources(self) -> int:
        return len(self.aux)

    @property
    def descriptors(self) -> Tuple[SourceDescriptor, ...]:
        return tuple(c.descriptor for c in self.aux)

    def source(self, name: str) -> AuxColumn:
        for col in self.aux:
            if col.name == name:
                return col
        raise KeyError(name)

    def subset(self, indices: Sequence[int]) -> "MultiSourceDataset":
        """Rows `indices` (re-sorted into time order) as a new dataset."""
        idx = np.asarray(sorted(int(i) for i in indices), dtype=np.int64)
        return MultiSourceDataset(
            main=self.main[idx],
            aux=tuple(AuxColumn(c.descriptor, c.values[idx]) for c in self.aux),
            time=self.time[idx],
            sample_ids=tuple(self.sample_ids[i] for i in idx),
            feature_names=self.feature_names,
        )

    def without_sources(self) -> "MultiSourceDataset":
        return MultiSourceDataset(self.main, (), self.time, self.sample_ids, self.feature_names)


@dataclass(frozen=True)
class SourceWeights:
    """Weights of the visual, auxiliary and temporal terms of the joint gain."""
    alpha_v: float
    alpha_aux: Tuple[float, ...]
    alpha_t: float

    def __post_init__(self):
        object.__setattr__(self, "alpha_aux", tuple(float(a) for a in self.alpha_aux))
        if not 0.0 < self.alpha_v <= 1.0:
            raise WeightsError(f"alpha_v must be in (0, 1], got {self.alpha_v}")
        if self.alpha_t < 0 or any(a < 0 for a in self.alpha_aux):
            raise WeightsError("source weights must be nonnegative")
        total = self.total
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise WeightsError(f"source weights must sum to 1, got {total!r}")

    @property
    def total(self) -> float:
        return float(np.sum([self.alpha_v, *self.alpha_aux, self.alpha_t]))

    @property
    def m(self) -> int:
        return len(self.alpha_aux)

    def as_list(self) -> List[float]:
        return [self.alpha_v, *self.alpha_aux, self.alpha_t]

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "SourceWeights":
        values = list(values)
        return cls(values[0], tuple(values[1:-1]), values[-1])


def default_weights(
    alpha_v: float,
    m: int,
    hints: Optional[Sequence[Optional[float]]] = None,
) -> SourceWeights:
    """
    Uniform weights: every auxiliary source and the temporal term get (1 - alpha_v)/(m+1).

    Optional per-source `hints` (SourceDescriptor.weight_hint) replace the uniform
    share of the auxiliary sources; they are rescaled together with the temporal
    share so the total stays 1.
    """
    if not 0.0 < alpha_v <= 1.0:
        raise WeightsError(f"alpha_v must be in (0, 1], got {alpha_v}")
    if m < 0:
        raise WeightsError(f"m must be nonnegative, got {m}")

    rest = 1.0 - alpha_v
    share = rest / (m + 1)
    if hints is None or all(h is None for h in hints):
        aux = [share] * m
        alpha_t = share
    else:
        if len(hints) != m:
            raise WeightsError(f"expected {m} weight hints, got {len(hints)}")
        raw = [share if h is None else float(h) for h in hints] + [share]
        scale = rest / sum(raw) if sum(raw) > 0 else 0.0
        aux = [r * scale for r in raw[:-1]]
        alpha_t = raw[-1] * scale

    # absorb rounding into the temporal share so the sum is exact
    alpha_t = max(0.0, 1.0 - alpha_v - float(np.sum(aux)))
    return SourceWeights(alpha_v, tuple(aux), alpha_t)


def visual_temporal_weights(alpha_v: float, m: int) -> SourceWeights:
    """Auxiliary sources discarded, alpha_v : alpha_t kept as in the uniform full model."""
    full = default_weights(alpha_v, m)
    scale = full.alpha_v + full.alpha_t
    alpha_v2 = full.alpha_v / scale
    return SourceWeights(alpha_v2, (0.0,) * m, 1.0 - alpha_v2)


def missing_fractions(dataset: MultiSourceDataset, subset: Sequence[int]) -> np.ndarray:
    """Fraction of missing entries of each auxiliary source within `subset` (repeats counted)."""
    idx = np.asarray(subset, dtype=np.int64)
    if idx.size == 0:
        raise DatasetValidationError("missing_fractions needs a nonempty subset")
    if dataset.n_sources == 0:
        return np.zeros(0)
    return np.array([col.missing[idx].mean() for col in dataset.aux], dtype=np.float64)
