"""Shared fixtures: small deterministic datasets and experiment configs."""

import pytest

from tempkd.config import parse_config
from tempkd.data import make_blobs


@pytest.fixture
def blob_dataset():
    # 3 well-separated classes; easy enough that a tiny net learns it fast
    return make_blobs(num_classes=3, per_class=12, dim=4, spread=0.05, seed=5)


@pytest.fixture
def tiny_config_dict():
    """Experiment config small enough for end-to-end CLI tests (< 1 s)."""
    return {
        "data": {
            "num_classes": 3,
            "per_class": 10,
            "dim": 4,
            "spread": 0.1,
            "seed": 3,
            "train_fraction": 0.8,
        },
        "teacher": {"hidden": [8], "epochs": 3, "seed": 1},
        "student": {"hidden": [4], "epochs": 3},
        "seeds": [11, 12],
    }


@pytest.fixture
def tiny_config(tiny_config_dict):
    return parse_config(tiny_config_dict)
