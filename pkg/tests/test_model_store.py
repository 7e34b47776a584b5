"""
Unit tests for model file persistence
"""
import json

import numpy as np
import pytest

from libs.analytics.train_config import TrainConfig
from libs.errors import ModelFileError
from services.clustering.model_store import SCHEMA_VERSION, dumps_model, load_model, save_model
from services.clustering.pipeline import ClusteringParams, train_model
from services.inference.tagging import assign_batch


@pytest.fixture
def trained(planted):
    dataset, _ = planted
    return dataset, train_model(dataset, TrainConfig(T_clust=8, seed=4), ClusteringParams(n_clusters=3))


class TestModelStore:
    """Versioned JSON model files"""

    def test_round_trip_preserves_predictions(self, trained, tmp_path):
        dataset, model = trained
        path = save_model(model, tmp_path / "model.json", dataset.sample_ids, dataset.feature_names)
        loaded = load_model(path)
        assert loaded.sample_ids == dataset.sample_ids
        assert loaded.feature_names == dataset.feature_names
        assert loaded.params.n_clusters == 3
        np.testing.assert_array_equal(loaded.clusters.labels, model.clusters.labels)
        before = [a.cluster for a in assign_batch(model.forest, model.clusters, dataset.main)]
        after = [a.cluster for a in assign_batch(loaded.forest, loaded.clusters, dataset.main)]
        assert before == after

    def test_byte_stable(self, trained, tmp_path):
        dataset, model = trained
        path = save_model(model, tmp_path / "model.json", dataset.sample_ids, dataset.feature_names)
        loaded = load_model(path)
        assert dumps_model(loaded, loaded.sample_ids, loaded.feature_names) == path.read_text()

    def test_schema_version(self, trained):
        dataset, model = trained
        data = json.loads(dumps_model(model, dataset.sample_ids, dataset.feature_names))
        assert data["schema_version"] == SCHEMA_VERSION
        assert data["clustering"] == {"knn_k": None, "k_max": 30, "n_clusters": 3}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelFileError):
            load_model(tmp_path / "absent.json")

    def test_not_json(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{not json")
        with pytest.raises(ModelFileError):
            load_model(path)

    def test_schema_violation(self, trained, tmp_path):
        dataset, model = trained
        data = json.loads(dumps_model(model, dataset.sample_ids, dataset.feature_names))
        data["schema_version"] = "0.1"
        path = tmp_path / "model.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ModelFileError):
            load_model(path)

    def test_inconsistent_config(self, trained, tmp_path):
        dataset, model = trained
        data = json.loads(dumps_model(model, dataset.sample_ids, dataset.feature_names))
        data["forest"]["config"]["phi"] = 0
        path = tmp_path / "model.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ModelFileError):
            load_model(path)
