"""
Pseudo two-class augmentation: N real rows plus N pseudo rows drawn from the
per-column empirical marginals, so unsupervised splitting can be scored as
real-vs-pseudo classification.
"""
from dataclasses import dataclass

import numpy as np

REAL = 0
PSEUDO = 1


@dataclass(frozen=True, eq=False)
class AugmentedSet:
    rows: np.ndarray          # (2N, d)
    labels: np.ndarray        # (2N,) REAL / PSEUDO
    origin_index: np.ndarray  # (2N,) source sample index for REAL rows, -1 for PSEUDO

    @property
    def n_real(self) -> int:
        return int(np.sum(self.labels == REAL))

    @property
    def is_pseudo(self) -> np.ndarray:
        return self.labels == PSEUDO


def augment(main: np.ndarray, rng: np.random.Generator) -> AugmentedSet:
    """
    Append N pseudo rows whose coordinates are drawn independently per column,
    uniformly with replacement from that column's N observed values.
    """
    main = np.asarray(main, dtype=np.float64)
    n, d = main.shape
    if n < 1:
        raise ValueError("augment needs at least one sample")

    picks = rng.integers(0, n, size=(n, d))
    pseudo = main[picks, np.arange(d)[None, :]]

    rows = np.vstack([main, pseudo])
    labels = np.concatenate([np.full(n, REAL, dtype=np.int8), np.full(n, PSEUDO, dtype=np.int8)])
    origin = np.concatenate([np.arange(n, dtype=np.int64), np.full(n, -1, dtype=np.int64)])
    return AugmentedSet(rows=rows, labels=labels, origin_index=origin)
