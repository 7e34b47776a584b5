"""
Key-clip summarisation of an unseen sequence.

One representative clip per occupied cluster is linked to the next
representative in time by a shortest path through the unseen clips' affinity
graph; the union of all path vertices forms the summary.
"""
import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import csgraph_from_dense, dijkstra

from apps.cli.schemas import SummaryClip, SummaryManifest, Typicality
from services.clustering.affinity import AffinityMatrix
from services.inference.tagging import Assignment, TagPrediction

logger = logging.getLogger(__name__)

INTERESTING_SHARE = 0.2


def representatives(clusters: Sequence[int], X: np.ndarray) -> List[int]:
    """
    Per occupied cluster, the clip nearest to the mean of that cluster's clips
    (rows of X in time order, so ties go to the earlier clip). Returned in time order.
    """
    clusters = np.asarray(clusters)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    reps = []
    for c in np.unique(clusters):
        members = np.nonzero(clusters == c)[0]
        centre = X[members].mean(axis=0)
        dist = np.linalg.norm(X[members] - centre, axis=1)
        reps.append(int(members[np.argmin(dist)]))
    return sorted(reps)


def edge_lengths(graph: AffinityMatrix) -> csr_matrix:
    """Sparse graph with edge length 1 - affinity on every off-diagonal nonzero."""
    lengths = np.where(graph.values > 0, 1.0 - graph.values, np.inf)
    np.fill_diagonal(lengths, np.inf)
    return csgraph_from_dense(lengths, null_value=np.inf)


def shortest_path(lengths: csr_matrix, source: int, target: int) -> Optional[List[int]]:
    """Dijkstra over nonnegative edge lengths; None when target is unreachable."""
    dist, pred = dijkstra(lengths, directed=False, indices=source, return_predecessors=True)
    if not np.isfinite(dist[target]):
        return None
    path = [target]
    while path[-1] != source:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def keyclip_paths(graph: AffinityMatrix, reps: Sequence[int]) -> List[int]:
    """Union of the shortest paths between consecutive representatives (edge length 1 - affinity)."""
    lengths = edge_lengths(graph)
    keys = set(int(r) for r in reps)
    for a, b in zip(reps[:-1], reps[1:]):
        path = shortest_path(lengths, int(a), int(b))
        if path is None:
            logger.warning(f"Representatives {a} and {b} are not connected; keeping the endpoints only")
            continue
        keys.update(path)
    return sorted(keys)


def interesting_clusters(counts: Mapping[int, int]) -> set:
    """Smallest ceil(20%) of the occupied clusters by clip count (ties to the lower id)."""
    occupied = sorted(counts.items(), key=lambda kv: (kv[1], kv[0]))
    n_flag = math.ceil(INTERESTING_SHARE * len(occupied))
    return {c for c, _ in occupied[:n_flag]}


def compose_summary(
    keys: Sequence[int],
    assignments: Sequence[Assignment],
    tags: Sequence[TagPrediction],
    times: np.ndarray,
    config: Optional[dict] = None,
) -> SummaryManifest:
    if len(keys) == 0:
        raise ValueError("summary needs at least one key clip")
    counts: Dict[int, int] = {}
    for a in assignments:
        counts[a.cluster] = counts.get(a.cluster, 0) + 1
    flagged = interesting_clusters(counts)

    order = sorted(set(int(k) for k in keys), key=lambda i: (float(times[i]), i))
    clips = []
    for i in order:
        a = assignments[i]
        clips.append(SummaryClip(
            id=a.sample_id,
            t=float(times[i]),
            cluster=a.cluster,
            typicality=Typicality.INTERESTING if a.cluster in flagged else Typicality.USUAL,
            tags={name: (tag.label if tag.label is not None else tag.index) for name, tag in tags[i].tags.items()},
        ))
    logger.info(f"Summary: {len(clips)} key clips, {len(flagged)} interesting cluster(s) of {len(counts)}")
    return SummaryManifest(clips=clips, length=len(clips), config=config or {})


def coverage(lengths: Sequence[int], length: int, covered: int, total: int) -> float:
    """(covered / total) * (max compared length / this length)."""
    if length <= 0 or any(v <= 0 for v in lengths):
        raise ValueError("summary lengths must be positive")
    if total <= 0 or not 0 <= covered <= total:
        raise ValueError(f"need 0 <= covered <= total and total > 0, got {covered}/{total}")
    return (covered / total) * (max(lengths) / length)
