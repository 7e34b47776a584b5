"""
Unit tests for dataset ingestion/export and the synthetic generator
"""
import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from libs.analytics.sources import SourceKind
from libs.errors import ConfigError, DuplicateIdError, MalformedCsvError, ManifestError, VocabularyError
from services.data.io import feature_groups, load_dataset, save_dataset
from services.data.synthgen import (
    SynthConfig,
    cluster_centres,
    generate,
    holdout_split,
    inject_missing,
    write_synth,
)


def write_case(tmp_path, main_rows, weather_rows, vocabulary=("sun", "rain")):
    pd.DataFrame(main_rows, columns=["sample_id", "t", "x", "y"]).to_csv(tmp_path / "main.csv", index=False)
    pd.DataFrame(weather_rows, columns=["sample_id", "weather"]).to_csv(tmp_path / "weather.csv", index=False)
    manifest = {
        "main_csv": "main.csv",
        "sources": [{"name": "weather", "kind": "categorical", "csv": "weather.csv", "vocabulary": list(vocabulary)}],
        "feature_groups": {"all": ["x", "y"]},
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


MAIN = [["b", 20, 1.0, 2.0], ["a", 0, 3.0, 4.0], ["c", 40, 5.0, 6.0]]


class TestLoadDataset:
    """Manifest-driven CSV ingestion"""

    def test_joins_on_id_and_sorts_by_time(self, tmp_path):
        path = write_case(tmp_path, MAIN, [["c", "rain"], ["a", "sun"], ["zzz", "sun"]])
        ds = load_dataset(path)
        assert ds.sample_ids == ("a", "b", "c")
        np.testing.assert_array_equal(ds.time, [0.0, 20.0, 40.0])
        np.testing.assert_array_equal(ds.main, [[3.0, 4.0], [1.0, 2.0], [5.0, 6.0]])
        assert ds.feature_names == ("x", "y")
        assert ds.source("weather").decoded() == ["sun", None, "rain"]
        assert feature_groups(path) == {"all": ["x", "y"]}

    def test_na_marks_missing(self, tmp_path):
        path = write_case(tmp_path, MAIN, [["a", "NA"], ["b", ""], ["c", "sun"]])
        assert load_dataset(path).source("weather").decoded() == [None, None, "sun"]

    def test_unknown_category(self, tmp_path):
        path = write_case(tmp_path, MAIN, [["a", "snow"]])
        with pytest.raises(VocabularyError):
            load_dataset(path)

    def test_duplicate_ids(self, tmp_path):
        path = write_case(tmp_path, MAIN + [["a", 60, 0.0, 0.0]], [])
        with pytest.raises(DuplicateIdError):
            load_dataset(path)

    def test_non_numeric_feature(self, tmp_path):
        path = write_case(tmp_path, [["a", 0, "abc", 1.0], ["b", 1, 2.0, 3.0]], [])
        with pytest.raises(MalformedCsvError):
            load_dataset(path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ManifestError):
            load_dataset(tmp_path / "absent.json")

    def test_invalid_manifest(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"main_csv": "m.csv", "surprise": 1}))
        with pytest.raises(ManifestError):
            load_dataset(path)

    def test_save_then_load_is_exact(self, tmp_path, planted):
        dataset, _ = planted
        path = save_dataset(dataset, tmp_path, name="p", groups={"g": ["f0"]})
        loaded = load_dataset(path)
        np.testing.assert_array_equal(loaded.main, dataset.main)
        np.testing.assert_array_equal(loaded.time, dataset.time)
        assert loaded.sample_ids == dataset.sample_ids
        np.testing.assert_array_equal(loaded.source("cat0").values, dataset.source("cat0").values)
        assert feature_groups(path) == {"g": ["f0"]}


class TestSynthgen:
    """Planted datasets"""

    def test_shapes_and_labels(self):
        config = SynthConfig(n_clusters=4, samples_per_cluster=5, d=6, n_continuous=1, seed=1)
        dataset, labels = generate(config)
        assert dataset.n_samples == 20
        assert dataset.n_features == 6
        assert [c.name for c in dataset.aux] == ["cat0", "num0"]
        assert dataset.source("cat0").descriptor.vocabulary == ("c0", "c1", "c2", "c3")
        assert dataset.source("num0").descriptor.kind == SourceKind.CONTINUOUS
        np.testing.assert_array_equal(labels, np.repeat(np.arange(4), 5))
        np.testing.assert_array_equal(dataset.time, 20.0 * np.arange(20))
        assert dataset.sample_ids[0] == "clip00000"

    def test_deterministic(self):
        a, _ = generate(SynthConfig(seed=3, samples_per_cluster=10))
        b, _ = generate(SynthConfig(seed=3, samples_per_cluster=10))
        np.testing.assert_array_equal(a.main, b.main)
        np.testing.assert_array_equal(a.source("cat0").values, b.source("cat0").values)

    def test_full_alignment_copies_label(self):
        dataset, labels = generate(SynthConfig(alignment=1.0, samples_per_cluster=10))
        np.testing.assert_array_equal(dataset.source("cat0").values, labels)

    def test_centres_are_distinct_corners(self):
        centres = cluster_centres(SynthConfig(n_clusters=4, d=5, blob_separation=8.0))
        assert len({tuple(c) for c in centres}) == 4
        assert set(np.unique(centres)) <= {0.0, 8.0}

    def test_adjacent_centres_sit_one_separation_apart(self):
        centres = cluster_centres(SynthConfig(n_clusters=4, d=20, blob_separation=8.0))
        assert np.all(centres[:, 2:] == 0.0)
        gaps = np.linalg.norm(centres[:, None, :] - centres[None, :, :], axis=2)
        assert gaps[~np.eye(4, dtype=bool)].min() == pytest.approx(8.0)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            SynthConfig(n_clusters=4, alignment=0.2)
        with pytest.raises(ValidationError):
            SynthConfig(n_clusters=8, d=2)

    def test_inject_missing(self):
        dataset, _ = generate(SynthConfig(samples_per_cluster=25, n_continuous=1))
        out = inject_missing(dataset, 0.2, np.random.default_rng(0))
        touched = out.source("cat0").missing | out.source("num0").missing
        assert touched.sum() == 20
        np.testing.assert_array_equal(out.main, dataset.main)
        with pytest.raises(ConfigError):
            inject_missing(dataset, 1.5, np.random.default_rng(0))

    def test_holdout_split(self):
        dataset, _ = generate(SynthConfig(samples_per_cluster=10))
        train, test, train_idx, test_idx = holdout_split(dataset, 0.25, np.random.default_rng(0))
        assert test.n_samples == 10 and train.n_samples == 30
        assert not set(train.sample_ids) & set(test.sample_ids)
        assert np.all(np.diff(test.time) >= 0)
        with pytest.raises(ConfigError):
            holdout_split(dataset, 0.01, np.random.default_rng(0))

    def test_write_synth(self, tmp_path):
        config = SynthConfig(samples_per_cluster=10, seed=2)
        paths = write_synth(config, tmp_path)
        assert [p.name for p in paths] == ["synth_manifest.json"]
        truth = pd.read_csv(tmp_path / "truth.csv")
        assert list(truth.columns) == ["sample_id", "label", "cat0"]
        assert load_dataset(paths[0]).n_samples == 40

    def test_write_synth_holdout(self, tmp_path):
        paths = write_synth(SynthConfig(samples_per_cluster=10, seed=2), tmp_path, holdout=0.25)
        assert [p.name for p in paths] == ["train_manifest.json", "test_manifest.json"]
        assert (tmp_path / "truth_test.csv").exists()
        assert load_dataset(paths[1]).n_samples == 10
