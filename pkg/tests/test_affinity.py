"""
Unit tests for the forest affinity, k-NN sparsification and normalisation
"""
import numpy as np
import pytest

from libs.analytics.forest import MscForest, train_forest
from libs.analytics.gain import RootImpurities
from libs.analytics.sources import SourceWeights
from libs.analytics.train_config import TrainConfig
from libs.analytics.tree import SplitParams, Tree, TreeNode
from libs.errors import ConfigError, IsolatedSampleError
from services.clustering.affinity import (
    KNN,
    AffinityMatrix,
    default_knn_k,
    export_coo_csv,
    forest_affinity,
    knn_sparsify,
    normalise,
    tree_affinity,
    with_self_affinity,
)

X = np.array([[0.0], [1.0], [2.0]])


def stump(threshold):
    nodes = [
        TreeNode(0, 3, SplitParams(0, threshold), left=1, right=2),
        TreeNode(1, 2),
        TreeNode(1, 1),
    ]
    return Tree(nodes, SourceWeights(1.0, (), 0.0), RootImpurities(0.5, (), 0.0))


def two_stump_forest():
    trees = [stump(1.5), stump(0.5)]
    return MscForest(trees, TrainConfig(T_clust=2), SourceWeights(1.0, (), 0.0), m_try=1, n_features=1)


class TestForestAffinity:
    """Co-leaf fractions over the trees"""

    def test_tree_affinity(self):
        np.testing.assert_array_equal(tree_affinity(stump(1.5), X), [[1, 1, 0], [1, 1, 0], [0, 0, 1]])

    def test_two_tree_average(self):
        A = forest_affinity(two_stump_forest(), X)
        np.testing.assert_allclose(A.values, [[1, 0.5, 0], [0.5, 1, 0.5], [0, 0.5, 1]])

    def test_properties(self, planted, planted_forest):
        dataset, _ = planted
        A = forest_affinity(planted_forest, dataset.main).values
        np.testing.assert_array_equal(A, A.T)
        np.testing.assert_array_equal(np.diag(A), 1.0)
        assert A.min() >= 0.0 and A.max() <= 1.0
        # entries are multiples of 1/T
        np.testing.assert_allclose(A * 20, np.round(A * 20), atol=1e-12)

    def test_independent_of_workers(self, planted, planted_forest):
        dataset, _ = planted
        serial = forest_affinity(planted_forest, dataset.main, workers=1).values
        chunked = forest_affinity(planted_forest, dataset.main, workers=3).values
        np.testing.assert_array_equal(serial, chunked)


class TestKnn:
    """k-NN sparsification"""

    A = AffinityMatrix(np.array([
        [1.0, 0.9, 0.2, 0.1],
        [0.9, 1.0, 0.3, 0.0],
        [0.2, 0.3, 1.0, 0.8],
        [0.1, 0.0, 0.8, 1.0],
    ]))

    def test_mutual_top_one(self):
        G = knn_sparsify(self.A, 1)
        assert G.kind == KNN
        expected = np.zeros((4, 4))
        expected[0, 1] = expected[1, 0] = 0.9
        expected[2, 3] = expected[3, 2] = 0.8
        np.testing.assert_array_equal(G.values, expected)

    def test_union_of_neighbourhoods(self):
        G = knn_sparsify(self.A, 2).values
        assert G[1, 2] == 0.3
        assert G[0, 2] == 0.2
        assert G[1, 3] == 0.0
        np.testing.assert_array_equal(G, G.T)
        np.testing.assert_array_equal(np.diag(G), 0.0)

    def test_ties_kept(self):
        A = AffinityMatrix(np.array([[1.0, 0.5, 0.5], [0.5, 1.0, 0.2], [0.5, 0.2, 1.0]]))
        G = knn_sparsify(A, 1).values
        assert G[0, 1] == 0.5 and G[0, 2] == 0.5

    def test_zero_affinity_never_an_edge(self):
        A = AffinityMatrix(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.4], [0.0, 0.4, 1.0]]))
        G = knn_sparsify(A, 1).values
        assert not G[0].any()

    def test_k_out_of_range(self):
        with pytest.raises(ConfigError):
            knn_sparsify(self.A, 0)
        with pytest.raises(ConfigError):
            knn_sparsify(self.A, 4)

    def test_default_k(self):
        assert default_knn_k(500) == 10
        assert default_knn_k(5000) == 14
        assert default_knn_k(5) == 4


class TestNormalise:
    """Symmetric degree normalisation"""

    def test_symmetric_with_unit_top_eigenvalue(self):
        S = normalise(with_self_affinity(knn_sparsify(TestKnn.A, 1)))
        np.testing.assert_allclose(S, S.T)
        assert np.max(np.linalg.eigvalsh(S)) == pytest.approx(1.0)

    def test_isolated_sample(self):
        A = AffinityMatrix(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.4], [0.0, 0.4, 0.0]]))
        with pytest.raises(IsolatedSampleError) as exc:
            normalise(A)
        assert exc.value.index == 0

    def test_export(self, tmp_path):
        path = export_coo_csv(AffinityMatrix(np.array([[1.0, 0.5], [0.5, 1.0]])), tmp_path / "a.csv")
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "i,j,value"
        assert len(lines) == 4


class TestAffinityOracle:
    """Leaf-grouped counting equals brute-force pairwise co-leaf counting"""

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force(self, planted, seed):
        dataset, _ = planted
        forest = train_forest(dataset, TrainConfig(T_clust=20, seed=seed))
        leaves = forest.apply(dataset.main)
        n = dataset.n_samples
        brute = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                brute[i, j] = np.sum(leaves[i] == leaves[j]) / forest.n_trees
        np.testing.assert_array_equal(forest_affinity(forest, dataset.main).values, brute)
