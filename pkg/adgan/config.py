#!/usr/bin/env python3

"""
adgan.config
------------
Run configuration: YAML (or JSON) in, validated :class:`TrainConfig` out.

Every field is checked on load; the first problem raises
:class:`~adgan.errors.ConfigError` naming the dotted field path, e.g.
``config field 'space.n_a': must be an integer ≥ 1``.

The canonical JSON form (sorted keys, no whitespace) is what checkpoints
store; its SHA-256 is the ``config_hash`` quoted by evaluation reports.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import yaml

from adgan.attributes import AGE_BINNERS, AGE_GROUPS, AttributeSpace
from adgan.errors import ConfigError
from adgan.networks import NetworkConfig
from adgan.objectives import LossWeights

LOGGER = logging.getLogger(__name__)

_MISSING = object()


# ───────────────────────────────────────────────────────────────────────────
#  Sections
# ───────────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class SpaceConfig:
    n_a: int
    n_g: int
    n_c: int


@dataclass(frozen=True)
class DatasetConfig:
    selector: str
    manifest: Optional[str] = None
    root: Optional[str] = None
    samples_per_label: int = 200
    train_fraction: float = 0.9
    workers: int = 4


@dataclass(frozen=True)
class OptimizerConfig:
    rho: float = 0.99
    eps: float = 1e-8


@dataclass(frozen=True)
class LoggingConfig:
    tz: str = "UTC"
    datefmt: str = "%Y-%m-%d %H:%M:%S"
    level: str = "INFO"


@dataclass(frozen=True)
class TrainConfig:
    resolution: int
    batch_size: int
    learning_rate: float
    stage1_iters: int
    stage2_iters: int
    seed: int
    space: SpaceConfig
    dataset: DatasetConfig
    weights: LossWeights = field(default_factory=LossWeights)
    network: Dict[str, Any] = field(default_factory=dict)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    non_saturating: bool = False
    zero_noise: bool = False
    dtype: str = "float64"
    checkpoint_interval: int = 0
    output_dir: str = "runs/default"
    labels: Dict[str, List[str]] = field(default_factory=dict)
    logging: LoggingConfig = field(default_factory=LoggingConfig)

    # derived views -------------------------------------------------------
    @property
    def attribute_space(self) -> AttributeSpace:
        s = self.space
        return AttributeSpace(s.n_a, s.n_g, s.n_c, self.resolution, self.resolution)

    @property
    def network_config(self) -> NetworkConfig:
        return NetworkConfig(resolution=self.resolution, dtype=self.dtype, **self.network)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def replace(self, **changes: Any) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# ───────────────────────────────────────────────────────────────────────────
#  Field validators
# ───────────────────────────────────────────────────────────────────────────
def _get(raw: Mapping[str, Any], key: str, prefix: str, default: Any = _MISSING) -> Any:
    if key in raw and raw[key] is not None:
        return raw[key]
    if default is _MISSING:
        raise ConfigError(prefix + key, "missing required field")
    return default


def _int(raw, key, prefix="", default=_MISSING, minimum: Optional[int] = None) -> int:
    value = _get(raw, key, prefix, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(prefix + key, f"must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(prefix + key, f"must be ≥ {minimum}, got {value}")
    return value


def _float(raw, key, prefix="", default=_MISSING, positive=False, nonneg=False) -> float:
    value = _get(raw, key, prefix, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(prefix + key, f"must be a number, got {value!r}")
    value = float(value)
    if positive and not value > 0:
        raise ConfigError(prefix + key, f"must be > 0, got {value}")
    if nonneg and not value >= 0:
        raise ConfigError(prefix + key, f"must be ≥ 0, got {value}")
    return value


def _bool(raw, key, prefix="", default=_MISSING) -> bool:
    value = _get(raw, key, prefix, default)
    if not isinstance(value, bool):
        raise ConfigError(prefix + key, f"must be true or false, got {value!r}")
    return value


def _str(raw, key, prefix="", default=_MISSING, choices=None) -> Optional[str]:
    value = _get(raw, key, prefix, default)
    if value is None:
        return None
    if not isinstance(value, str):
        raise ConfigError(prefix + key, f"must be a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(prefix + key, f"must be one of {', '.join(choices)}, got {value!r}")
    return value


def _section(raw, key, required=False) -> Mapping[str, Any]:
    value = raw.get(key)
    if value is None:
        if required:
            raise ConfigError(key, "missing required section")
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(key, "must be a mapping")
    return value


def _no_extra(raw: Mapping[str, Any], allowed, prefix="") -> None:
    for key in raw:
        if key not in allowed:
            raise ConfigError(prefix + str(key), "unknown field")


# ───────────────────────────────────────────────────────────────────────────
#  Parsing
# ───────────────────────────────────────────────────────────────────────────
_TOP = {
    "resolution", "batch_size", "learning_rate", "stage1_iters", "stage2_iters", "seed",
    "space", "dataset", "weights", "network", "optimizer", "non_saturating", "zero_noise",
    "dtype", "checkpoint_interval", "output_dir", "labels", "logging",
}
_NETWORK_FIELDS = {"base_channels": int, "d_z": int, "n_res_blocks": int,
                   "leaky_slope": float, "adain_eps": float}


def config_from_dict(raw: Mapping[str, Any]) -> TrainConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("<root>", "config must be a mapping")
    _no_extra(raw, _TOP)

    resolution = _int(raw, "resolution", minimum=16)
    if resolution % 16:
        raise ConfigError("resolution", f"must be a multiple of 16, got {resolution}")

    sp = _section(raw, "space", required=True)
    _no_extra(sp, {"n_a", "n_g", "n_c"}, "space.")
    space = SpaceConfig(*(_int(sp, k, "space.", minimum=1) for k in ("n_a", "n_g", "n_c")))

    ds = _section(raw, "dataset", required=True)
    _no_extra(ds, {f.name for f in dataclasses.fields(DatasetConfig)}, "dataset.")
    selector = _str(ds, "selector", "dataset.", choices=sorted(AGE_BINNERS))
    dataset = DatasetConfig(
        selector=selector,
        manifest=_str(ds, "manifest", "dataset.", None),
        root=_str(ds, "root", "dataset.", None),
        samples_per_label=_int(ds, "samples_per_label", "dataset.", 200, minimum=1),
        train_fraction=_float(ds, "train_fraction", "dataset.", 0.9, positive=True),
        workers=_int(ds, "workers", "dataset.", 4, minimum=1),
    )
    if dataset.train_fraction > 1:
        raise ConfigError("dataset.train_fraction", f"must be ≤ 1, got {dataset.train_fraction}")
    if selector != "synthetic" and not dataset.manifest:
        raise ConfigError("dataset.manifest", f"required for selector {selector!r}")
    if selector in AGE_GROUPS and space.n_a != AGE_GROUPS[selector]:
        raise ConfigError("space.n_a", f"{selector} binning yields {AGE_GROUPS[selector]} age groups, got {space.n_a}")

    w = _section(raw, "weights")
    _no_extra(w, {"lambda1", "lambda2", "lambda3", "beta"}, "weights.")
    defaults = LossWeights()
    weights = LossWeights(**{k: _float(w, k, "weights.", getattr(defaults, k), nonneg=True)
                             for k in ("lambda1", "lambda2", "lambda3", "beta")})

    net = _section(raw, "network")
    _no_extra(net, _NETWORK_FIELDS, "network.")
    network: Dict[str, Any] = {}
    for key, kind in _NETWORK_FIELDS.items():
        if key in net:
            if kind is int:
                network[key] = _int(net, key, "network.", minimum=1 if key != "n_res_blocks" else 0)
            else:
                network[key] = _float(net, key, "network.", nonneg=True)

    opt = _section(raw, "optimizer")
    _no_extra(opt, {"rho", "eps"}, "optimizer.")
    optimizer = OptimizerConfig(
        rho=_float(opt, "rho", "optimizer.", 0.99, nonneg=True),
        eps=_float(opt, "eps", "optimizer.", 1e-8, positive=True),
    )
    if optimizer.rho >= 1:
        raise ConfigError("optimizer.rho", f"must be < 1, got {optimizer.rho}")

    labels_raw = _section(raw, "labels")
    _no_extra(labels_raw, {"age", "gender", "race"}, "labels.")
    labels: Dict[str, List[str]] = {}
    for axis, size in (("age", space.n_a), ("gender", space.n_g), ("race", space.n_c)):
        names = labels_raw.get(axis)
        if names is None:
            continue
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise ConfigError(f"labels.{axis}", "must be a list of names")
        if len(names) != size:
            raise ConfigError(f"labels.{axis}", f"needs {size} names, got {len(names)}")
        labels[axis] = list(names)

    lg = _section(raw, "logging")
    _no_extra(lg, {"tz", "datefmt", "level"}, "logging.")
    logging_cfg = LoggingConfig(
        tz=_str(lg, "tz", "logging.", "UTC"),
        datefmt=_str(lg, "datefmt", "logging.", "%Y-%m-%d %H:%M:%S"),
        level=_str(lg, "level", "logging.", "INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR")),
    )

    return TrainConfig(
        resolution=resolution,
        batch_size=_int(raw, "batch_size", minimum=1),
        learning_rate=_float(raw, "learning_rate", positive=True),
        stage1_iters=_int(raw, "stage1_iters", minimum=0),
        stage2_iters=_int(raw, "stage2_iters", minimum=0),
        seed=_int(raw, "seed"),
        space=space,
        dataset=dataset,
        weights=weights,
        network=network,
        optimizer=optimizer,
        non_saturating=_bool(raw, "non_saturating", default=False),
        zero_noise=_bool(raw, "zero_noise", default=False),
        dtype=_str(raw, "dtype", default="float64", choices=("float64", "float32")),
        checkpoint_interval=_int(raw, "checkpoint_interval", default=0, minimum=0),
        output_dir=_str(raw, "output_dir", default="runs/default"),
        labels=labels,
        logging=logging_cfg,
    )


def load_config(path: Union[str, Path], overrides: Optional[Mapping[str, Any]] = None) -> TrainConfig:
    """
    Read a YAML/JSON file and apply CLI *overrides* (``None`` values ignored)
    before validation: CLI > config file > defaults.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError("--config", f"file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"cannot parse {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    cfg = config_from_dict(raw)
    LOGGER.debug("config %s → hash %s", path, cfg.config_hash()[:12])
    return cfg


def config_from_json(text: str) -> TrainConfig:
    """Rebuild a config from its canonical JSON snapshot (checkpoint header)."""
    raw = json.loads(text)
    raw["network"] = raw.get("network") or {}
    return config_from_dict(raw)
