#!/usr/bin/env python3

import copy
import sys
from pathlib import Path

import numpy as np
import pytest

# make the repository root importable (adgan/ and main.py)
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from adgan.attributes import AttributeSpace  # noqa: E402
from adgan.config import config_from_dict  # noqa: E402
from adgan.data import SyntheticDataset  # noqa: E402
from adgan.networks import ModelBundle, NetworkConfig  # noqa: E402
from adgan.utils.synthetic_faces import SyntheticSpec  # noqa: E402

TINY_RAW = {
    "resolution": 16,
    "batch_size": 2,
    "learning_rate": 1e-3,
    "stage1_iters": 3,
    "stage2_iters": 2,
    "seed": 7,
    "space": {"n_a": 2, "n_g": 2, "n_c": 2},
    "dataset": {"selector": "synthetic", "samples_per_label": 3, "train_fraction": 1.0, "workers": 2},
    "network": {"base_channels": 2, "d_z": 4, "n_res_blocks": 1},
    "labels": {"age": ["young", "old"], "gender": ["male", "female"], "race": ["red", "yellow"]},
}


@pytest.fixture
def tiny_raw():
    """Raw config mapping for 16×16 images and two-channel layers."""
    return copy.deepcopy(TINY_RAW)


@pytest.fixture
def tiny_config(tiny_raw):
    return config_from_dict(tiny_raw)


@pytest.fixture
def tiny_space():
    return AttributeSpace(2, 2, 2, 16, 16)


@pytest.fixture
def tiny_bundle(tiny_space):
    cfg = NetworkConfig(resolution=16, base_channels=2, d_z=4, n_res_blocks=1)
    return ModelBundle(tiny_space, cfg, np.random.default_rng(0))


@pytest.fixture
def tiny_dataset(tiny_config):
    s = tiny_config.attribute_space
    spec = SyntheticSpec(16, s.n_a, s.n_g, s.n_c, samples_per_label=3, seed=tiny_config.seed)
    return SyntheticDataset(spec)
