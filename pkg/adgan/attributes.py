#!/usr/bin/env python3

"""
adgan.attributes
----------------
The label space ``S = {age, gender, race}``.

* :func:`flat_index` maps a label triple to ``t ∈ [0, n)``, age-major, then
  gender, then race.
* :func:`encode_code` builds the spatial conditioning tensor: ``n`` one-hot
  maps plus a standard-normal noise channel, shape ``(n + 1, w, h)``.
* :func:`bin_age_morph` / :func:`bin_age_utk` turn ages in years into group
  indices; both are reachable by name through :data:`AGE_BINNERS`.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence

import numpy as np

from adgan.errors import LabelError

AXES = ("age", "gender", "race")


@dataclass(frozen=True)
class AttributeSpace:
    n_a: int
    n_g: int
    n_c: int
    w: int = 32
    h: int = 32

    def __post_init__(self):
        for axis, size in (("n_a", self.n_a), ("n_g", self.n_g), ("n_c", self.n_c)):
            if int(size) < 1:
                raise LabelError(f"{axis} must be ≥ 1, got {size}")

    @property
    def n(self) -> int:
        return self.n_a * self.n_g * self.n_c

    @property
    def code_channels(self) -> int:
        return self.n + 1

    def size_of(self, axis: str) -> int:
        return {"age": self.n_a, "gender": self.n_g, "race": self.n_c}[axis]

    def with_resolution(self, resolution: int) -> "AttributeSpace":
        return AttributeSpace(self.n_a, self.n_g, self.n_c, resolution, resolution)

    def labels(self) -> Iterator["AttributeLabel"]:
        """Every label, in flat-index order."""
        for a in range(self.n_a):
            for g in range(self.n_g):
                for r in range(self.n_c):
                    yield AttributeLabel(a, g, r)

    def describe(self) -> str:
        return f"age ∈ [0, {self.n_a}), gender ∈ [0, {self.n_g}), race ∈ [0, {self.n_c})"


@dataclass(frozen=True)
class AttributeLabel:
    age_group: int
    gender: int
    race: int

    def validate(self, space: AttributeSpace) -> "AttributeLabel":
        for axis, value in zip(AXES, (self.age_group, self.gender, self.race)):
            if not 0 <= value < space.size_of(axis):
                raise LabelError(f"{axis}={value} outside the trained space ({space.describe()})")
        return self

    def replace(self, **changes: int) -> "AttributeLabel":
        values = {"age_group": self.age_group, "gender": self.gender, "race": self.race}
        for key, value in changes.items():
            values["age_group" if key == "age" else key] = int(value)
        return AttributeLabel(**values)

    def as_tuple(self):
        return (self.age_group, self.gender, self.race)


# ───────────────────────────────────────────────────────────────────────────
#  Flat index and spatial code
# ───────────────────────────────────────────────────────────────────────────
def flat_index(label: AttributeLabel, space: AttributeSpace) -> int:
    label.validate(space)
    return (label.age_group * space.n_g + label.gender) * space.n_c + label.race


def label_from_index(t: int, space: AttributeSpace) -> AttributeLabel:
    """Inverse of :func:`flat_index`."""
    if not 0 <= t < space.n:
        raise LabelError(f"flat index {t} outside [0, {space.n})")
    rest, race = divmod(t, space.n_c)
    age, gender = divmod(rest, space.n_g)
    return AttributeLabel(age, gender, race)


def encode_code(
    label: AttributeLabel,
    space: AttributeSpace,
    rng: np.random.Generator,
    zero_noise: bool = False,
    dtype=np.float64,
) -> np.ndarray:
    """
    ``(n + 1, w, h)`` array: channel ``flat_index(label)`` all ones, the other
    ``n − 1`` one-hot channels zero, channel ``n`` fresh N(0, 1) noise (or zeros
    with *zero_noise*; the generator is not advanced then).
    """
    t = flat_index(label, space)
    code = np.zeros((space.n + 1, space.w, space.h), dtype=dtype)
    code[t] = 1.0
    if not zero_noise:
        code[space.n] = rng.standard_normal((space.w, space.h))
    return code


def encode_codes(
    labels: Sequence[AttributeLabel],
    space: AttributeSpace,
    rng: np.random.Generator,
    zero_noise: bool = False,
    dtype=np.float64,
) -> np.ndarray:
    """Batched :func:`encode_code`; noise is drawn in label order."""
    return np.stack([encode_code(lb, space, rng, zero_noise, dtype) for lb in labels])


# ───────────────────────────────────────────────────────────────────────────
#  Age binning
# ───────────────────────────────────────────────────────────────────────────
# Inclusive upper bounds of every group except the last.
MORPH_BOUNDS = (30, 40, 50)
UTK_BOUNDS = (5, 10, 15, 20, 30, 40, 50, 60, 70)

MORPH_GROUP_NAMES = ("30-", "31-40", "41-50", "51+")
UTK_GROUP_NAMES = ("0-5", "6-10", "11-15", "16-20", "21-30", "31-40",
                   "41-50", "51-60", "61-70", "71+")


def _bin(age: float, bounds: Sequence[int]) -> int:
    if age < 0:
        raise LabelError(f"age must be ≥ 0, got {age}")
    return bisect.bisect_left(bounds, int(np.ceil(age)))


def bin_age_morph(age: float) -> int:
    """30- → 0, 31-40 → 1, 41-50 → 2, 51+ → 3."""
    return _bin(age, MORPH_BOUNDS)


def bin_age_utk(age: float) -> int:
    """Ten groups: 0-5, 6-10, 11-15, 16-20, 21-30, 31-40, 41-50, 51-60, 61-70, 71+."""
    return _bin(age, UTK_BOUNDS)


def bin_age_identity(age: float) -> int:
    """Synthetic manifests store the group index directly in the age column."""
    if age < 0:
        raise LabelError(f"age must be ≥ 0, got {age}")
    return int(age)


AGE_BINNERS: Dict[str, Callable[[float], int]] = {
    "morph": bin_age_morph,
    "utk": bin_age_utk,
    "synthetic": bin_age_identity,
}

AGE_GROUPS: Dict[str, int] = {"morph": len(MORPH_BOUNDS) + 1, "utk": len(UTK_BOUNDS) + 1}


# ───────────────────────────────────────────────────────────────────────────
#  Named attributes (CLI)
# ───────────────────────────────────────────────────────────────────────────
def resolve_attribute(
    axis: str,
    value: str,
    space: AttributeSpace,
    names: Optional[Mapping[str, Sequence[str]]] = None,
) -> int:
    """
    Turn ``race=african`` / ``race=1`` into an index, using the config's
    ``labels`` section for names.
    """
    key = "age" if axis in ("age", "age_group") else axis
    if key not in AXES:
        raise LabelError(f"unknown attribute axis '{axis}' (expected one of {', '.join(AXES)})")
    known: List[str] = list((names or {}).get(key, []))
    lowered = [n.lower() for n in known]
    if value.lower() in lowered:
        idx = lowered.index(value.lower())
    else:
        try:
            idx = int(value)
        except ValueError:
            hint = f"; known names: {', '.join(known)}" if known else ""
            raise LabelError(f"{key}={value!r} is neither an index nor a known name{hint}") from None
    if not 0 <= idx < space.size_of(key):
        raise LabelError(f"{key}={value} outside the trained space ({space.describe()})")
    return idx


def parse_attribute_overrides(
    pairs: Sequence[str],
    space: AttributeSpace,
    names: Optional[Mapping[str, Sequence[str]]] = None,
) -> Dict[str, int]:
    """``["race=african", "gender=1"]`` → ``{"race": 2, "gender": 1}``."""
    out: Dict[str, int] = {}
    for pair in pairs:
        if "=" not in pair:
            raise LabelError(f"attribute override must look like axis=value, got {pair!r}")
        axis, value = (p.strip() for p in pair.split("=", 1))
        key = "age" if axis in ("age", "age_group") else axis
        out[key] = resolve_attribute(axis, value, space, names)
    return out
