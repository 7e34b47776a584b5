"""
Feature and source correlations read off a trained forest.

During growth every split node records, for each other sampled feature, how
closely that feature's own best partition agrees with the chosen one, and for
each auxiliary source the normalised gain of the chosen split. Node values
are averaged per tree, then over trees; source-level correlations average the
feature-level values over the cross product of two feature groups.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from libs.analytics.forest import MscForest
from services.config.flags import flag

logger = logging.getLogger(__name__)


def aggregate_correlation(per_tree: Sequence[Tuple[float, int]], exclude_empty: bool = False) -> float:
    """
    Mean over trees of the per-tree node mean. `per_tree` holds one (sum, count)
    per tree; trees with count 0 contribute 0 unless `exclude_empty`.
    """
    means = [s / c for s, c in per_tree if c > 0]
    denom = len(means) if exclude_empty else len(per_tree)
    return float(sum(means) / denom) if denom else 0.0


def _aggregate_table(forest: MscForest, attr: str, shape: Tuple[int, int], exclude_empty: bool):
    sums = np.zeros(shape)
    trees_with = np.zeros(shape, dtype=np.int64)
    counts = np.zeros(shape, dtype=np.int64)
    for tree in forest.trees:
        for (a, b), (s, c) in getattr(tree.correlation, attr).items():
            if c > 0:
                sums[a, b] += s / c
                trees_with[a, b] += 1
                counts[a, b] += c
    if exclude_empty:
        values = np.divide(sums, trees_with, out=np.zeros(shape), where=trees_with > 0)
    else:
        values = sums / max(forest.n_trees, 1)
    return values, counts


def source_correlation(lam: np.ndarray, group_i: Sequence[int], group_j: Sequence[int]) -> float:
    """Mean of lam over group_i x group_j."""
    if len(group_i) == 0 or len(group_j) == 0:
        raise ValueError("feature groups must be nonempty")
    return float(np.mean(lam[np.ix_(list(group_i), list(group_j))]))


@dataclass
class CorrelationReport:
    feature_names: List[str]
    source_names: List[str]
    group_names: List[str]
    feature: np.ndarray        # (d, d) lambda(nu, tau)
    feature_counts: np.ndarray  # (d, d) total co-occurrences
    aux: np.ndarray            # (d, m) lambda(nu, omega)
    psi: np.ndarray            # (G, G)
    psi_aux: np.ndarray        # (G, m)

    @property
    def psi_symmetric(self) -> np.ndarray:
        return (self.psi + self.psi.T) / 2.0

    def top_pairs(self, limit: int = 20) -> List[dict]:
        d = len(self.feature_names)
        pairs = [
            (self.feature[a, b], a, b) for a in range(d) for b in range(d)
            if a != b and self.feature_counts[a, b] > 0
        ]
        pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
        return [
            {
                "feature": self.feature_names[a],
                "other": self.feature_names[b],
                "lambda": float(v),
                "co_occurrences": int(self.feature_counts[a, b]),
            }
            for v, a, b in pairs[:limit]
        ]


def correlation_report(
    forest: MscForest,
    feature_names: Sequence[str],
    source_names: Sequence[str],
    groups: Optional[Dict[str, List[str]]] = None,
    exclude_empty: Optional[bool] = None,
) -> CorrelationReport:
    """Feature-level and group-level correlations; groups default to one per feature."""
    if exclude_empty is None:
        exclude_empty = flag("MSC_EXCLUDE_EMPTY_TREES", False)
    d, m = len(feature_names), len(source_names)
    feature, counts = _aggregate_table(forest, "features", (d, d), exclude_empty)
    aux, _ = _aggregate_table(forest, "aux", (d, m), exclude_empty)

    groups = groups or {name: [name] for name in feature_names}
    index = {name: j for j, name in enumerate(feature_names)}
    unknown = sorted({f for members in groups.values() for f in members} - set(index))
    if unknown:
        raise ValueError(f"feature groups reference unknown features: {unknown}")
    group_idx = {g: [index[f] for f in members] for g, members in groups.items()}
    names = list(group_idx)
    psi = np.array([[source_correlation(feature, group_idx[a], group_idx[b]) for b in names] for a in names])
    psi_aux = np.array([[float(np.mean(aux[group_idx[g], j])) for j in range(m)] for g in names]).reshape(len(names), m)

    logger.info(f"Correlation report over {forest.n_trees} trees, {len(names)} feature groups, {m} sources")
    return CorrelationReport(list(feature_names), list(source_names), names, feature, counts, aux, psi, psi_aux)


def export_report(report: CorrelationReport, out_dir, symmetric: bool = False, limit: int = 20) -> List[Path]:
    """psi CSV, auxiliary psi CSV, feature-level CSV and a JSON of the top feature pairs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    psi = report.psi_symmetric if symmetric else report.psi
    paths = [out / "psi.csv", out / "psi_aux.csv", out / "feature_correlation.csv", out / "top_pairs.json"]
    pd.DataFrame(psi, index=report.group_names, columns=report.group_names).to_csv(paths[0])
    pd.DataFrame(report.psi_aux, index=report.group_names, columns=report.source_names).to_csv(paths[1])
    pd.DataFrame(report.feature, index=report.feature_names, columns=report.feature_names).to_csv(paths[2])
    paths[3].write_text(json.dumps({"symmetric": symmetric, "top_pairs": report.top_pairs(limit)}, indent=2, sort_keys=True))
    return paths
