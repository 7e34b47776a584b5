"""
Model file persistence: versioned JSON holding the forest, the cluster model
and the clustering parameters. Output is byte-stable for a fixed model.
"""
import json
import logging
from pathlib import Path
from typing import Optional, Sequence

import jsonschema

from libs.analytics.forest import MscForest
from libs.errors import ModelFileError
from services.clustering.pipeline import ClusteringParams, TrainedModel
from services.clustering.spectral import ClusterModel

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

_NODE = {
    "type": "object",
    "required": ["depth", "n_rows"],
    "properties": {
        "depth": {"type": "integer", "minimum": 0},
        "n_rows": {"type": "integer", "minimum": 0},
        "feature": {"type": "integer", "minimum": 0},
        "threshold": {"type": "number"},
        "left": {"type": "integer", "minimum": 0},
        "right": {"type": "integer", "minimum": 0},
        "second": {"type": "integer", "minimum": 0},
        "coefficients": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "members": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "oob": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
    "oneOf": [
        {"required": ["feature", "threshold", "left", "right"]},
        {"required": ["members", "oob"]},
    ],
}

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "forest", "clusters", "clustering", "training"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "forest": {
            "type": "object",
            "required": ["config", "base_weights", "m_try", "n_features", "trees"],
            "properties": {
                "config": {"type": "object"},
                "base_weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "m_try": {"type": "integer", "minimum": 1},
                "n_features": {"type": "integer", "minimum": 1},
                "trees": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["nodes", "fan_in", "weights", "roots"],
                        "properties": {"nodes": {"type": "array", "minItems": 1, "items": _NODE}},
                    },
                },
            },
        },
        "clusters": {
            "type": "object",
            "required": ["labels", "centroids", "sizes", "profiles"],
        },
        "clustering": {
            "type": "object",
            "required": ["k_max"],
            "properties": {
                "knn_k": {"type": ["integer", "null"], "minimum": 1},
                "k_max": {"type": "integer", "minimum": 2},
                "n_clusters": {"type": ["integer", "null"], "minimum": 2},
            },
        },
        "training": {
            "type": "object",
            "required": ["sample_ids", "feature_names"],
        },
    },
}


def model_to_dict(model: TrainedModel, sample_ids: Sequence[str], feature_names: Sequence[str]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "forest": model.forest.to_dict(),
        "clusters": model.clusters.to_dict(),
        "clustering": {
            "knn_k": model.params.knn_k,
            "k_max": model.params.k_max,
            "n_clusters": model.params.n_clusters,
        },
        "training": {"sample_ids": list(sample_ids), "feature_names": list(feature_names)},
    }


def dumps_model(model: TrainedModel, sample_ids: Sequence[str], feature_names: Sequence[str]) -> str:
    return json.dumps(
        model_to_dict(model, sample_ids, feature_names),
        sort_keys=True,
        allow_nan=False,
        separators=(",", ":"),
    )


def save_model(model: TrainedModel, path, sample_ids: Sequence[str], feature_names: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_model(model, sample_ids, feature_names))
    logger.info(f"Saved model ({model.forest.n_trees} trees, K={model.n_clusters}) to {path}")
    return path


class LoadedModel(TrainedModel):
    """TrainedModel plus the training bookkeeping stored alongside it."""

    def __init__(self, forest, clusters, params, sample_ids, feature_names):
        super().__init__(forest, clusters, params)
        self.sample_ids = tuple(sample_ids)
        self.feature_names = tuple(feature_names)


def load_model(path) -> LoadedModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ModelFileError(f"Model file not found: {path}", path=str(path)) from e
    except json.JSONDecodeError as e:
        raise ModelFileError(f"Model file is not valid JSON: {e}", path=str(path)) from e
    try:
        jsonschema.validate(data, MODEL_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ModelFileError(f"Model file {path} violates the schema: {e.message}", path=str(path)) from e

    clustering = data["clustering"]
    params = ClusteringParams(
        knn_k=clustering.get("knn_k"),
        k_max=clustering["k_max"],
        n_clusters=clustering.get("n_clusters"),
    )
    try:
        forest = MscForest.from_dict(data["forest"])
        clusters = ClusterModel.from_dict(data["clusters"])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFileError(f"Model file {path} is inconsistent: {e}", path=str(path)) from e
    logger.info(f"Loaded model from {path}: {forest.n_trees} trees, K={clusters.n_clusters}")
    return LoadedModel(forest, clusters, params, data["training"]["sample_ids"], data["training"]["feature_names"])
