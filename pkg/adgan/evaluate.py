#!/usr/bin/env python3

"""
adgan.evaluate
--------------
Synthesis with a trained bundle and the attribute preservation rate.

For every sampled input ``X_i`` and every target age group ``a``,
``G(X_i, F(S_t))`` is rendered with ``S_t = {a, gender_i, race_i}``; a
classifier decodes the output and the rate is the share of outputs whose
gender (or race) still matches the input.  Unclassifiable outputs count as
misses.

``embedding="individual"`` replaces ``F(S_t)`` by ``E(X_t)`` for a style image
of class ``S_t``: the with/without-disentangler comparison.
"""
from __future__ import annotations

import importlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
from tqdm import tqdm

from adgan import tensor as T
from adgan.attributes import AttributeLabel, encode_codes
from adgan.data import Dataset, DatasetView, SyntheticDataset
from adgan.errors import ConfigError, DataError, LabelError
from adgan.networks import ModelBundle
from adgan.utils.synthetic_faces import SyntheticOracle

LOGGER = logging.getLogger(__name__)

Classifier = Callable[[np.ndarray], Optional[AttributeLabel]]

PRESERVED_AXES = ("gender", "race")

# Published preservation rates (%) for the 31-40 / 41-50 / 51+ targets on
# MORPH, quoted in report footers for context.
REFERENCE_RATES: Dict[str, Sequence[float]] = {
    "gender": (97.50, 97.43, 95.25),
    "race": (96.55, 95.75, 95.60),
}
REFERENCE_GROUPS = ("31-40", "41-50", "51+")


# ───────────────────────────────────────────────────────────────────────────
#  Synthesis
# ───────────────────────────────────────────────────────────────────────────
def synthesize(
    bundle: ModelBundle,
    images: np.ndarray,
    targets: Sequence[AttributeLabel],
    rng: np.random.Generator,
    zero_noise: bool = False,
    style_images: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    ``G(X, F(code(S_t)))`` for a batch ``(N, 3, R, R)`` and N target labels, or
    ``G(X, E(X_t))`` when *style_images* is given.  No tape is recorded.
    """
    for t in targets:
        t.validate(bundle.space)
    x = T.const(np.asarray(images, dtype=bundle.cfg.np_dtype))
    if style_images is not None:
        z = bundle.E(T.const(np.asarray(style_images, dtype=bundle.cfg.np_dtype)))
    else:
        codes = encode_codes(targets, bundle.space, rng, zero_noise, bundle.cfg.np_dtype)
        z = bundle.F(T.const(codes))
    return bundle.G(x, z).values


def age_sweep(
    bundle: ModelBundle,
    image: np.ndarray,
    label: AttributeLabel,
    rng: np.random.Generator,
    target_groups: Optional[Sequence[int]] = None,
    zero_noise: bool = False,
    style_images: Optional[Sequence[np.ndarray]] = None,
) -> List[np.ndarray]:
    """One output per target age group, gender and race held from *label*."""
    groups = list(range(bundle.space.n_a)) if target_groups is None else list(target_groups)
    targets = [label.replace(age=a) for a in groups]
    batch = np.repeat(np.asarray(image)[None], len(targets), axis=0)
    style = None if style_images is None else np.stack(list(style_images))
    return list(synthesize(bundle, batch, targets, rng, zero_noise, style))


# ───────────────────────────────────────────────────────────────────────────
#  Report
# ───────────────────────────────────────────────────────────────────────────
@dataclass
class EvalReport:
    """Counts per target group; rates are derived from them."""

    target_groups: List[int]
    sample_count: int
    config_hash: str
    matches: Dict[str, Dict[int, int]]
    age_hits: Dict[int, int]
    unclassifiable: Dict[int, int]
    embedding: str = "common"
    passthrough: bool = False
    group_names: List[str] = field(default_factory=list)

    def rate(self, axis: str, group: int) -> float:
        return 100.0 * self.matches[axis][group] / self.sample_count

    def age_accuracy(self, group: int) -> float:
        return 100.0 * self.age_hits[group] / self.sample_count

    def mean_rate(self, axis: str) -> float:
        return float(np.mean([self.rate(axis, g) for g in self.target_groups]))

    def mean_age_accuracy(self) -> float:
        return float(np.mean([self.age_accuracy(g) for g in self.target_groups]))

    @property
    def rates(self) -> Dict[str, Dict[int, float]]:
        return {axis: {g: self.rate(axis, g) for g in self.target_groups} for axis in self.matches}

    def _name(self, g: int) -> str:
        return self.group_names[g] if g < len(self.group_names) else str(g)

    def to_dict(self) -> Dict[str, object]:
        return {
            "config_hash": self.config_hash,
            "sample_count": self.sample_count,
            "embedding": self.embedding,
            "passthrough": self.passthrough,
            "target_groups": [self._name(g) for g in self.target_groups],
            "preservation_rate": {
                axis: {self._name(g): r for g, r in per.items()} for axis, per in self.rates.items()
            },
            "age_accuracy": {self._name(g): self.age_accuracy(g) for g in self.target_groups},
            "unclassifiable": {self._name(g): self.unclassifiable[g] for g in self.target_groups},
            "counts": {axis: {self._name(g): c for g, c in per.items()} for axis, per in self.matches.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        cols = [self._name(g) for g in self.target_groups]
        width = max(8, *(len(c) for c in cols))
        head = f"{'attribute':<12}" + "".join(f"{c:>{width + 2}}" for c in cols) + f"{'mean':>{width + 2}}"
        lines = [head, "─" * len(head)]
        for axis in self.matches:
            cells = "".join(f"{self.rate(axis, g):>{width + 2}.2f}" for g in self.target_groups)
            lines.append(f"{axis:<12}{cells}{self.mean_rate(axis):>{width + 2}.2f}")
        cells = "".join(f"{self.age_accuracy(g):>{width + 2}.2f}" for g in self.target_groups)
        lines.append(f"{'age (target)':<12}{cells}{self.mean_age_accuracy():>{width + 2}.2f}")
        lines.append("─" * len(head))
        mode = "passthrough" if self.passthrough else f"{self.embedding} embedding"
        lines.append(f"{self.sample_count} inputs per group, {mode}, config {self.config_hash[:12]}")
        refs = "; ".join(
            f"{axis} " + "/".join(f"{v:.2f}" for v in vals) for axis, vals in REFERENCE_RATES.items()
        )
        lines.append(f"published MORPH reference ({'/'.join(REFERENCE_GROUPS)}): {refs}")
        return "\n".join(lines)


# ───────────────────────────────────────────────────────────────────────────
#  Metric
# ───────────────────────────────────────────────────────────────────────────
def _is_synthetic(dataset: Dataset) -> bool:
    while isinstance(dataset, DatasetView):
        dataset = dataset.base
    return isinstance(dataset, SyntheticDataset)


def default_classifier(dataset: Dataset) -> Classifier:
    if _is_synthetic(dataset):
        return SyntheticOracle(dataset.space)
    raise DataError("real datasets need a classifier; pass one with --classifier module:callable")


def load_classifier(spec: str) -> Classifier:
    """Import ``package.module:callable``."""
    module_name, _, attr = spec.partition(":")
    if not module_name or not attr:
        raise ConfigError("--classifier", f"expected module:callable, got {spec!r}")
    try:
        obj = getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError("--classifier", f"cannot load {spec!r}: {exc}") from None
    if not callable(obj):
        raise ConfigError("--classifier", f"{spec!r} is not callable")
    return obj


def preservation_rate(
    bundle: ModelBundle,
    dataset: Dataset,
    rng: np.random.Generator,
    axes: Sequence[str] = PRESERVED_AXES,
    target_groups: Optional[Sequence[int]] = None,
    sample_count: int = 2000,
    classifier: Optional[Classifier] = None,
    embedding: str = "common",
    passthrough: bool = False,
    zero_noise: bool = False,
    batch_size: int = 10,
    config_hash: str = "",
    group_names: Optional[Sequence[str]] = None,
    workers: int = 4,
    progress: bool = True,
) -> EvalReport:
    """
    Preservation rate per axis and target group.

    *passthrough* skips synthesis and classifies the inputs themselves (a
    sanity check of the classifier).  Inputs are drawn without replacement
    when the dataset is large enough.
    """
    if embedding not in ("common", "individual"):
        raise ConfigError("--embedding", f"must be common or individual, got {embedding!r}")
    for axis in axes:
        if axis not in PRESERVED_AXES:
            raise LabelError(f"preservation is measured on gender or race, got {axis!r}")
    if len(dataset) == 0 or sample_count < 1:
        raise DataError("evaluation needs a non-empty dataset and sample_count ≥ 1")
    space = bundle.space
    groups = list(range(space.n_a)) if target_groups is None else [int(g) for g in target_groups]
    for g in groups:
        if not 0 <= g < space.n_a:
            raise LabelError(f"target age group {g} outside [0, {space.n_a})")
    classify = classifier or default_classifier(dataset)

    picks = rng.choice(len(dataset), size=sample_count, replace=sample_count > len(dataset))
    labels = [dataset.label(int(i)) for i in picks]
    by_label: Dict[AttributeLabel, List[int]] = {}
    if embedding == "individual" and not passthrough:
        for i in range(len(dataset)):
            by_label.setdefault(dataset.label(i), []).append(i)

    matches = {axis: {g: 0 for g in groups} for axis in axes}
    age_hits = {g: 0 for g in groups}
    unclassifiable = {g: 0 for g in groups}

    total = len(groups) * len(picks)
    with ThreadPoolExecutor(max_workers=max(1, workers), thread_name_prefix="classify") as pool, \
            tqdm(total=total, desc="Evaluate", unit="img", disable=not progress) as bar:
        for g in groups:
            for start in range(0, len(picks), batch_size):
                idx = picks[start:start + batch_size]
                inputs = np.stack([dataset.image(int(i)) for i in idx])
                in_labels = labels[start:start + batch_size]
                targets = [lb.replace(age=g) for lb in in_labels]
                if passthrough:
                    outputs = inputs
                else:
                    style = None
                    if embedding == "individual":
                        style = np.stack([
                            dataset.image(int(rng.choice(_pool_for(by_label, t)))) for t in targets
                        ])
                    outputs = synthesize(bundle, inputs, targets, rng, zero_noise, style)
                for lb, pred in zip(in_labels, pool.map(classify, list(outputs))):
                    if pred is None:
                        unclassifiable[g] += 1
                        continue
                    for axis in axes:
                        if getattr(pred, axis) == getattr(lb, axis):
                            matches[axis][g] += 1
                    if pred.age_group == g:
                        age_hits[g] += 1
                bar.update(len(idx))

    report = EvalReport(
        target_groups=groups,
        sample_count=len(picks),
        config_hash=config_hash,
        matches=matches,
        age_hits=age_hits,
        unclassifiable=unclassifiable,
        embedding=embedding,
        passthrough=passthrough,
        group_names=list(group_names or []),
    )
    LOGGER.info("📊  preservation: %s", ", ".join(f"{a} {report.mean_rate(a):.2f}%" for a in axes))
    return report


def _pool_for(by_label: Mapping[AttributeLabel, List[int]], target: AttributeLabel) -> List[int]:
    pool = by_label.get(target)
    if not pool:
        raise DataError(f"no style image of class {target.as_tuple()} for the individual-embedding path")
    return pool
