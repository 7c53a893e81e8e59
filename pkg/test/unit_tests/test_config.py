#!/usr/bin/env python3

from pathlib import Path

import pytest
import yaml

from adgan.config import config_from_dict, config_from_json, load_config
from adgan.errors import ConfigError

REPO = Path(__file__).resolve().parents[2]


def test_tiny_config_values(tiny_config):
    assert tiny_config.resolution == 16
    assert tiny_config.attribute_space.n == 8
    assert tiny_config.network_config.d_z == 4
    assert tiny_config.weights.lambda1 == 0.1
    assert tiny_config.optimizer.rho == 0.99
    assert tiny_config.checkpoint_interval == 0
    assert tiny_config.dtype == "float64"


def test_missing_field_is_named(tiny_raw):
    del tiny_raw["batch_size"]
    with pytest.raises(ConfigError, match="config field 'batch_size': missing required field") as info:
        config_from_dict(tiny_raw)
    assert info.value.field == "batch_size"
    assert info.value.exit_code == 2


@pytest.mark.parametrize("edit, field", [
    ({"resolution": 40}, "resolution"),
    ({"resolution": 8}, "resolution"),
    ({"batch_size": 0}, "batch_size"),
    ({"learning_rate": -1.0}, "learning_rate"),
    ({"bogus": 1}, "bogus"),
    ({"space": {"n_a": 0, "n_g": 2, "n_c": 2}}, "space.n_a"),
    ({"weights": {"lambda2": -0.5}}, "weights.lambda2"),
    ({"optimizer": {"rho": 1.0}}, "optimizer.rho"),
    ({"dtype": "float16"}, "dtype"),
    ({"labels": {"race": ["red"]}}, "labels.race"),
    ({"network": {"d_z": "big"}}, "network.d_z"),
])
def test_invalid_fields(tiny_raw, edit, field):
    tiny_raw.update(edit)
    with pytest.raises(ConfigError) as info:
        config_from_dict(tiny_raw)
    assert info.value.field == field


def test_morph_selector_needs_four_age_groups(tiny_raw):
    tiny_raw["dataset"] = {"selector": "morph", "manifest": "m.csv"}
    with pytest.raises(ConfigError, match="space.n_a"):
        config_from_dict(tiny_raw)
    tiny_raw["space"]["n_a"] = 4
    tiny_raw.pop("labels")
    assert config_from_dict(tiny_raw).space.n_a == 4


def test_real_selector_needs_manifest(tiny_raw):
    tiny_raw["dataset"] = {"selector": "utk"}
    tiny_raw["space"]["n_a"] = 10
    with pytest.raises(ConfigError, match="dataset.manifest"):
        config_from_dict(tiny_raw)


def test_cli_overrides_win(tmp_path, tiny_raw):
    path = tmp_path / "c.yml"
    path.write_text(yaml.safe_dump(tiny_raw))
    cfg = load_config(path, overrides={"seed": 99, "output_dir": None})
    assert cfg.seed == 99
    assert cfg.output_dir == "runs/default"


def test_unparsable_file(tmp_path):
    path = tmp_path / "c.yml"
    path.write_text("resolution: [16\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(path)


def test_hash_is_stable_and_sensitive(tiny_raw):
    a = config_from_dict(tiny_raw)
    b = config_from_dict(dict(reversed(list(tiny_raw.items()))))
    assert a.config_hash() == b.config_hash()
    assert len(a.config_hash()) == 64
    assert a.replace(seed=8).config_hash() != a.config_hash()


def test_json_snapshot_round_trip(tiny_config):
    assert config_from_json(tiny_config.to_json()) == tiny_config


@pytest.mark.parametrize("name, n_a, n_c", [("morph.yml", 4, 2), ("utk.yml", 10, 5)])
def test_full_scale_configs_load(name, n_a, n_c):
    cfg = load_config(REPO / "configs" / name)
    assert (cfg.resolution, cfg.batch_size, cfg.learning_rate) == (128, 10, 1e-4)
    assert (cfg.stage1_iters, cfg.stage2_iters) == (100000, 50000)
    assert (cfg.space.n_a, cfg.space.n_c) == (n_a, n_c)
    assert len(cfg.labels["age"]) == n_a


def test_desk_config_loads():
    cfg = load_config(REPO / "config.yml")
    assert cfg.dataset.selector == "synthetic"
    assert cfg.attribute_space.n == 12
    assert cfg.resolution == 32
