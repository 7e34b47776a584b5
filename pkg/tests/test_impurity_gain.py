"""
Unit tests for impurities, the joint gain and adaptive source weights
"""
import numpy as np
import pytest

from libs.analytics.gain import (
    NodeSamples,
    RootImpurities,
    adapt_weights,
    gain_terms,
    joint_gain,
    midpoint_thresholds,
    root_impurities,
    score_thresholds,
)
from libs.analytics.impurity import classification_gain, gini, regression_gain, regression_impurity
from libs.analytics.sources import SourceWeights


def make_node(is_pseudo, aux=(), n_categories=(), time=None):
    is_pseudo = np.asarray(is_pseudo, dtype=bool)
    if time is None:
        time = np.where(is_pseudo, np.nan, np.arange(is_pseudo.size, dtype=float))
    return NodeSamples(is_pseudo, tuple(np.asarray(a) for a in aux), tuple(n_categories), np.asarray(time, dtype=float))


class TestImpurity:
    """Gini and regression impurities"""

    @pytest.mark.parametrize("counts,expected", [([10, 0], 0.0), ([5, 5], 0.5), ([3, 1], 0.375)])
    def test_gini_values(self, counts, expected):
        assert gini(counts) == pytest.approx(expected, abs=1e-15)

    def test_gini_invariances(self):
        """Permuting categories or scaling counts leaves Gini unchanged"""
        assert gini([1, 2, 3]) == pytest.approx(gini([3, 1, 2]))
        assert gini([1, 2, 3]) == pytest.approx(gini([4, 8, 12]))

    def test_gini_rejects_empty(self):
        with pytest.raises(ValueError):
            gini([0, 0])

    def test_regression_impurity(self):
        assert regression_impurity([3.0, 3.0, 3.0]) == 0.0
        assert regression_impurity([0.0, 2.0]) == pytest.approx(1.0)
        assert regression_impurity([1.0, 2.0, 3.0]) == pytest.approx(2.0 / 3.0)
        with pytest.raises(ValueError):
            regression_impurity([])

    def test_classification_gain(self):
        assert classification_gain([5, 5], [5, 0], [0, 5]) == pytest.approx(0.5)
        assert classification_gain([4, 4], [3, 1], [1, 3]) == pytest.approx(0.125)
        assert classification_gain([4, 2], [2, 1], [2, 1]) == pytest.approx(0.0, abs=1e-15)

    def test_classification_gain_empty_child(self):
        with pytest.raises(ValueError):
            classification_gain([2, 2], [2, 2], [0, 0])

    def test_regression_gain(self):
        assert regression_gain([0, 1, 2, 3], [0, 1], [2, 3]) == pytest.approx(1.0)


class TestJointGain:
    """Joint gain over visual, auxiliary and temporal terms"""

    def test_visual_only_reduces_to_classification_gain(self):
        node = make_node([0, 0, 0, 1, 1, 0, 1, 1])
        go_left = np.array([1, 1, 1, 1, 0, 0, 0, 0], dtype=bool)
        roots = root_impurities(node)
        weights = SourceWeights(1.0, (), 0.0)
        expected = classification_gain([4, 4], [3, 1], [1, 3]) / roots.visual
        assert joint_gain(go_left, node, weights, roots) == pytest.approx(expected)

    def test_weighted_combination(self):
        """Two REAL rows of category 0 left, two of category 1 plus four pseudo right"""
        is_pseudo = [0, 0, 0, 0, 1, 1, 1, 1]
        codes = np.array([0, 0, 1, 1, -1, -1, -1, -1])
        node = make_node(is_pseudo, aux=[codes], n_categories=[2])
        go_left = np.array([1, 1, 0, 0, 0, 0, 0, 0], dtype=bool)
        roots = root_impurities(node)
        assert roots.visual == pytest.approx(0.5)
        assert roots.aux[0] == pytest.approx(0.5)
        assert roots.temporal == pytest.approx(1.25)

        visual, aux, temporal = gain_terms(go_left, node, roots)
        assert visual == pytest.approx(1.0 / 3.0)
        assert aux[0] == pytest.approx(1.0)
        assert temporal == pytest.approx(0.8)

        weights = SourceWeights(0.5, (0.25,), 0.25)
        expected = 0.5 / 3.0 + 0.25 * 1.0 + 0.25 * 0.8
        assert joint_gain(go_left, node, weights, roots) == pytest.approx(expected)

    def test_missing_auxiliary_contributes_zero(self):
        codes = np.full(6, -1)
        node = make_node([0, 0, 0, 1, 1, 1], aux=[codes], n_categories=[3])
        roots = RootImpurities(0.5, (0.5,), 0.0)
        go_left = np.array([1, 1, 0, 0, 0, 1], dtype=bool)
        _, aux, _ = gain_terms(go_left, node, roots)
        assert aux == (0.0,)

    def test_zero_root_term_dropped(self):
        node = make_node([0, 0, 1, 1], aux=[np.array([1, 1, -1, -1])], n_categories=[2])
        roots = root_impurities(node)
        assert roots.aux[0] == 0.0
        _, aux, _ = gain_terms(np.array([1, 0, 1, 0], dtype=bool), node, roots)
        assert aux == (0.0,)

    def test_degenerate_split_is_zero(self):
        node = make_node([0, 1, 0, 1])
        roots = root_impurities(node)
        assert joint_gain(np.ones(4, dtype=bool), node, SourceWeights(1.0, (), 0.0), roots) == 0.0


class TestThresholdScoring:
    """Vectorised threshold search agrees with the scalar joint gain"""

    def test_midpoints(self):
        cut, thr = midpoint_thresholds(np.array([0.0, 0.0, 1.0, 3.0]))
        np.testing.assert_array_equal(cut, [1, 2])
        np.testing.assert_allclose(thr, [0.5, 2.0])

    def test_midpoint_bumped_to_upper_value(self):
        a = 1.0
        b = np.nextafter(a, 2.0)
        _, thr = midpoint_thresholds(np.array([a, b]))
        assert thr[0] == b
        assert a < thr[0]

    def test_matches_scalar_gain(self):
        rng = np.random.default_rng(3)
        n = 40
        is_pseudo = rng.random(n) < 0.5
        cat = np.where(is_pseudo, -1, rng.integers(0, 3, n))
        cat[~is_pseudo & (rng.random(n) < 0.2)] = -1
        cont = np.where(is_pseudo, np.nan, rng.normal(size=n))
        time = np.where(is_pseudo, np.nan, rng.permutation(n).astype(float))
        node = NodeSamples(is_pseudo, (cat, cont), (3, 0), time)
        roots = root_impurities(node)
        weights = SourceWeights(0.4, (0.2, 0.2), 0.2)
        values = np.round(rng.normal(size=n), 1)

        scores = score_thresholds(values, node, weights, roots)
        assert not scores.empty
        for thr, gain in zip(scores.thresholds, scores.gains):
            assert gain == pytest.approx(joint_gain(values < thr, node, weights, roots), abs=1e-9)

    def test_continuous_source_scale_invariance(self):
        rng = np.random.default_rng(11)
        n = 30
        is_pseudo = rng.random(n) < 0.5
        cont = np.where(is_pseudo, np.nan, rng.normal(size=n))
        weights = SourceWeights(0.5, (0.5,), 0.0)
        values = rng.normal(size=n)

        def best(scale):
            node = NodeSamples(is_pseudo, (cont * scale,), (0,), np.full(n, np.nan))
            scores = score_thresholds(values, node, weights, root_impurities(node))
            return scores.best()

        pos1, _, gain1 = best(1.0)
        pos2, _, gain2 = best(250.0)
        assert pos1 == pos2
        assert gain1 == pytest.approx(gain2, rel=1e-9)

    def test_constant_feature_has_no_candidates(self):
        node = make_node([0, 1, 0, 1])
        scores = score_thresholds(np.ones(4), node, SourceWeights(1.0, (), 0.0), root_impurities(node))
        assert scores.empty


class TestAdaptWeights:
    """Missing-fraction weight adaptation"""

    def test_no_missing_keeps_base(self):
        base = SourceWeights(0.5, (0.25,), 0.25)
        assert adapt_weights(base, [0.0]) == base

    def test_partial_missing(self):
        w = adapt_weights(SourceWeights(0.5, (0.25,), 0.25), [0.2])
        assert w.alpha_v == pytest.approx(0.5 + 0.05 / 3)
        assert w.alpha_aux[0] == pytest.approx(0.2 + 0.05 / 3)
        assert w.alpha_t == pytest.approx(0.25 + 0.05 / 3)

    def test_fully_missing_source_keeps_only_share(self):
        w = adapt_weights(SourceWeights(0.5, (0.25,), 0.25), [1.0])
        share = 0.25 / 3
        assert w.alpha_aux[0] == pytest.approx(share, abs=1e-15)
        np.testing.assert_allclose([w.alpha_v, w.alpha_t], [0.58333333333, 0.33333333333], atol=1e-9)

    def test_randomized_sums_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            m = int(rng.integers(1, 6))
            raw = rng.random(m + 2)
            raw /= raw.sum()
            base = SourceWeights(float(raw[0]), tuple(raw[1:-1]), 1.0 - float(raw[0]) - float(np.sum(raw[1:-1])))
            w = adapt_weights(base, rng.random(m))
            assert abs(w.total - 1.0) <= 1e-12

    def test_rejects_bad_deltas(self):
        base = SourceWeights(0.5, (0.25,), 0.25)
        with pytest.raises(ValueError):
            adapt_weights(base, [1.5])
        with pytest.raises(ValueError):
            adapt_weights(base, [0.1, 0.1])
