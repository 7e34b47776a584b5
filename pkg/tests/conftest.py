"""
Shared fixtures: small planted datasets and forests trained on them.
"""
import sys
from pathlib import Path

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from libs.analytics.forest import train_forest
from libs.analytics.train_config import TrainConfig
from services.data.synthgen import SynthConfig, generate


@pytest.fixture
def planted():
    """Three well separated clusters of 12 samples, one aligned categorical source."""
    dataset, labels = generate(SynthConfig(n_clusters=3, samples_per_cluster=12, d=4, blob_separation=10.0, seed=7))
    return dataset, labels


@pytest.fixture
def planted_forest(planted):
    dataset, _ = planted
    return train_forest(dataset, TrainConfig(T_clust=20, seed=3))
