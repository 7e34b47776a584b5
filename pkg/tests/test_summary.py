"""
Unit tests for key-clip summarisation, coverage and the summary baselines
"""
import numpy as np
import pytest

from apps.cli.schemas import Typicality
from services.clustering.affinity import AffinityMatrix
from services.inference.tagging import Assignment, SourceTag, TagPrediction
from services.summary.baselines import baseline_sufficient_change, baseline_uniform, sufficient_change
from services.summary.summarizer import (
    compose_summary,
    coverage,
    edge_lengths,
    interesting_clusters,
    keyclip_paths,
    representatives,
    shortest_path,
)
from services.summary.timeline import render_timeline


def chain_graph():
    A = np.zeros((5, 5))
    for i in range(3):
        A[i, i + 1] = A[i + 1, i] = 0.9
    A[0, 3] = A[3, 0] = 0.1
    return AffinityMatrix(A)


def assignments_for(clusters):
    return [
        Assignment(f"clip{i}", c, np.array([c]), {c: 1})
        for i, c in enumerate(clusters)
    ]


def tags_for(n):
    return [TagPrediction(f"clip{i}", {"weather": SourceTag([1.0, 0.0], 0, label="sun")}) for i in range(n)]


class TestKeyClips:
    """Representatives and shortest paths between them"""

    def test_representatives(self):
        X = np.array([[0.0], [1.0], [2.0], [10.0], [12.0]])
        assert representatives([0, 0, 0, 1, 1], X) == [1, 3]

    def test_representatives_in_time_order(self):
        X = np.array([[5.0], [0.0], [5.0], [0.0]])
        assert representatives([1, 0, 1, 0], X) == [0, 1]

    def test_shortest_path_prefers_strong_affinities(self):
        lengths = edge_lengths(chain_graph())
        assert shortest_path(lengths, 0, 3) == [0, 1, 2, 3]
        assert shortest_path(lengths, 0, 4) is None

    def test_keyclip_union(self):
        assert keyclip_paths(chain_graph(), [0, 3]) == [0, 1, 2, 3]

    def test_unit_affinity_is_a_zero_length_edge(self):
        A = np.zeros((3, 3))
        A[0, 1] = A[1, 0] = 1.0
        A[1, 2] = A[2, 1] = 0.9
        A[0, 2] = A[2, 0] = 0.05
        graph = AffinityMatrix(A)
        assert shortest_path(edge_lengths(graph), 0, 1) == [0, 1]
        assert keyclip_paths(graph, [0, 2]) == [0, 1, 2]

    def test_disconnected_representatives_kept(self):
        assert keyclip_paths(chain_graph(), [2, 4]) == [2, 4]

    def test_keys_contain_every_representative(self):
        keys = keyclip_paths(chain_graph(), [0, 2, 4])
        assert {0, 2, 4} <= set(keys)


class TestTypicality:
    """Smallest 20% of occupied clusters are interesting"""

    def test_smallest_cluster(self):
        assert interesting_clusters({0: 10, 1: 3, 2: 3, 3: 8, 4: 20}) == {1}

    def test_single_cluster(self):
        assert interesting_clusters({4: 7}) == {4}

    def test_rounds_up(self):
        assert interesting_clusters({c: 10 + c for c in range(6)}) == {0, 1}

    def test_compose_orders_by_time(self):
        clusters = [0, 0, 0, 0, 1]
        times = np.array([0.0, 20.0, 40.0, 60.0, 80.0])
        manifest = compose_summary([4, 0, 2], assignments_for(clusters), tags_for(5), times, {"seed": 1})
        assert [c.id for c in manifest.clips] == ["clip0", "clip2", "clip4"]
        assert manifest.length == 3
        assert manifest.clips[2].typicality == Typicality.INTERESTING
        assert manifest.clips[0].typicality == Typicality.USUAL
        assert manifest.clips[0].tags == {"weather": "sun"}
        assert manifest.config == {"seed": 1}

    def test_compose_needs_keys(self):
        with pytest.raises(ValueError):
            compose_summary([], assignments_for([0]), tags_for(1), np.zeros(1))


class TestCoverage:
    """Event coverage with a length penalty"""

    LENGTHS = [28, 29, 29, 21, 28]

    @pytest.mark.parametrize("length,covered,expected", [
        (28, 3, 25.9),
        (29, 2, 16.7),
        (29, 4, 33.3),
        (21, 3, 34.5),
        (28, 7, 60.4),
    ])
    def test_reference_values(self, length, covered, expected):
        assert round(100 * coverage(self.LENGTHS, length, covered, 12), 1) == expected

    def test_exact_values(self):
        assert coverage(self.LENGTHS, 28, 7, 12) == pytest.approx(0.6042, abs=1e-4)
        assert coverage(self.LENGTHS, 28, 3, 12) == pytest.approx(0.2589, abs=1e-4)
        assert coverage(self.LENGTHS, 28, 0, 12) == 0.0

    def test_scale_invariant(self):
        scaled = [3 * v for v in self.LENGTHS]
        assert coverage(scaled, 84, 7, 12) == pytest.approx(coverage(self.LENGTHS, 28, 7, 12))

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            coverage(self.LENGTHS, 0, 1, 12)
        with pytest.raises(ValueError):
            coverage(self.LENGTHS, 28, 13, 12)


class TestBaselines:
    """Uniform and sufficient-change selections"""

    def test_uniform(self):
        assert baseline_uniform(10, 2) == [0, 5]
        assert baseline_uniform(10, 3) == [0, 3, 6]
        assert baseline_uniform(4, 4) == [0, 1, 2, 3]
        with pytest.raises(ValueError):
            baseline_uniform(3, 4)

    def test_sufficient_change(self):
        X = np.array([[0.0], [0.5], [1.2], [1.3], [3.0]])
        assert sufficient_change(X, 1.0) == [0, 2, 4]
        assert sufficient_change(X, 1.0, norm="L1") == [0, 2, 4]
        with pytest.raises(ValueError):
            sufficient_change(X, 1.0, norm="Linf")

    def test_sufficient_change_hits_target(self):
        X = np.array([[0.0], [10.0], [20.0], [30.0], [40.0]])
        assert baseline_sufficient_change(X, 3) == [0, 2, 4]
        assert baseline_sufficient_change(X, 1) == [0]
        assert len(baseline_sufficient_change(X, 5)) == 5


class TestTimeline:
    """SVG timeline rendering"""

    def test_render_is_reproducible(self, tmp_path):
        clusters = [0, 0, 0, 0, 1]
        times = np.array([0.0, 20.0, 40.0, 60.0, 80.0])
        manifest = compose_summary([0, 4], assignments_for(clusters), tags_for(5), times)
        a = render_timeline(manifest, times, clusters, tmp_path / "a.svg")
        b = render_timeline(manifest, times, clusters, tmp_path / "b.svg")
        assert a.read_text().lstrip().startswith("<?xml")
        assert a.read_bytes() == b.read_bytes()
