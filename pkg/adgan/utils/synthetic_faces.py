#!/usr/bin/env python3

"""
adgan.utils.synthetic_faces
---------------------------
Procedural stand-in for a face dataset, with an exact rule-based decoder.

A "face" is a filled ellipse on a neutral gray background:

* race   → ellipse hue, one fixed hue per race index (60° apart);
* age    → vertical radius shrinks with the age group, and age group ``a``
           draws ``a`` darker horizontal wrinkle lines across the ellipse;
* gender → gender 1 adds a dark hair band just above the ellipse.

Position jitter is an integer pixel offset, so every render of one label has
exactly the same ellipse raster, only shifted.  :func:`oracle_classify`
relies on that: age is read off the vertical extent by comparison with a
noiseless template render.

Run standalone to preview a few samples::

    python -m adgan.utils.synthetic_faces --resolution 32 --out preview.png
"""
from __future__ import annotations

import argparse
import functools
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv

from adgan.attributes import AttributeLabel, AttributeSpace

LOGGER = logging.getLogger(__name__)

# Hues as fractions of the colour circle: red, yellow, green, cyan, blue, magenta.
HUE_TABLE: Tuple[float, ...] = tuple(k / 6.0 for k in range(6))
HUE_GAP = 1.0 / 6.0

BACKGROUND = 0.5
HAIR = 0.1
FACE_SAT, FACE_VAL, WRINKLE_VAL = 0.85, 0.9, 0.4

MAX_RACES, MAX_AGES, MAX_GENDERS = len(HUE_TABLE), 5, 2

# decoding thresholds
MASK_SAT, MASK_VAL = 0.4, 0.25
MIN_AREA_FRAC = 0.08
MIN_HUE_RESULTANT = 0.9
FILL_RANGE = (0.55, 0.95)
DARK_VAL = 0.3
WRINKLE_REL = 0.65


@dataclass(frozen=True)
class SyntheticSpec:
    resolution: int = 32
    n_a: int = 3
    n_g: int = 2
    n_c: int = 2
    samples_per_label: int = 200
    seed: int = 0
    hue_shift: float = 0.0

    def __post_init__(self):
        if self.n_c > MAX_RACES or self.n_a > MAX_AGES or self.n_g > MAX_GENDERS:
            raise ValueError(
                f"synthetic faces support n_a ≤ {MAX_AGES}, n_g ≤ {MAX_GENDERS}, "
                f"n_c ≤ {MAX_RACES}; got {self.n_a}/{self.n_g}/{self.n_c}"
            )
        if self.resolution < 16:
            raise ValueError(f"synthetic faces need resolution ≥ 16, got {self.resolution}")

    @property
    def space(self) -> AttributeSpace:
        return AttributeSpace(self.n_a, self.n_g, self.n_c, self.resolution, self.resolution)


# ───────────────────────────────────────────────────────────────────────────
#  Rendering
# ───────────────────────────────────────────────────────────────────────────
def _geometry(resolution: int, age_group: int) -> Tuple[float, float, float, float]:
    r = resolution
    return r / 2.0, 0.55 * r, 0.28 * r, (0.36 - 0.04 * age_group) * r


def _ellipse_mask(resolution: int, age_group: int, jx: int, jy: int) -> np.ndarray:
    cx, cy, rx, ry = _geometry(resolution, age_group)
    # subtract the integer jitter from the grid so every shift rasterizes identically
    yy, xx = np.mgrid[0:resolution, 0:resolution]
    dy = ((yy - jy) - cy) / ry
    dx = ((xx - jx) - cx) / rx
    return dx * dx + dy * dy <= 1.0


def render_face(
    label: AttributeLabel,
    resolution: int,
    jx: int = 0,
    jy: int = 0,
    hue_shift: float = 0.0,
) -> np.ndarray:
    """``(H, W, 3)`` float image in ``[0, 1]``."""
    r = resolution
    a = label.age_group
    cx, cy, rx, _ = _geometry(r, a)
    hue = (HUE_TABLE[label.race] + hue_shift) % 1.0

    inside = _ellipse_mask(r, a, jx, jy)
    img = np.full((r, r, 3), BACKGROUND, dtype=np.float64)
    img[inside] = hsv_to_rgb(np.array([hue, FACE_SAT, FACE_VAL]))

    wrinkle = hsv_to_rgb(np.array([hue, FACE_SAT, WRINKLE_VAL]))
    centre_row = int(np.floor(cy + 0.5)) + jy
    for k in range(a):
        row = centre_row - (a - 1) + 2 * k
        if 0 <= row < r:
            img[row, inside[row]] = wrinkle

    if label.gender == 1:
        rows = np.flatnonzero(inside.any(axis=1))
        top = int(rows[0])
        bh = max(2, int(round(0.08 * r)))
        r0, r1 = max(0, top - 1 - bh), max(0, top - 1)
        c0 = max(0, int(np.ceil(cx + jx - rx)))
        c1 = min(r, int(np.floor(cx + jx + rx)) + 1)
        img[r0:r1, c0:c1] = HAIR
    return img


def synth_generate(label: AttributeLabel, spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """
    One synthetic face as a ``(3, H, W)`` float64 array in ``[−1, 1]``; the
    only randomness is the integer position jitter.
    """
    label.validate(spec.space)
    j = max(1, spec.resolution // 32)
    jx, jy = (int(v) for v in rng.integers(-j, j + 1, size=2))
    img = render_face(label, spec.resolution, jx, jy, spec.hue_shift)
    return img.transpose(2, 0, 1) * 2.0 - 1.0


# ───────────────────────────────────────────────────────────────────────────
#  Oracle
# ───────────────────────────────────────────────────────────────────────────
@functools.lru_cache(maxsize=None)
def _template_extents(resolution: int, n_a: int) -> Tuple[int, ...]:
    out = []
    for a in range(n_a):
        rows = np.flatnonzero(_ellipse_mask(resolution, a, 0, 0).any(axis=1))
        out.append(int(rows[-1] - rows[0] + 1))
    return tuple(out)


def _to_hsv(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"oracle expects a (3, H, W) image, got {arr.shape}")
    rgb = np.clip((arr.transpose(1, 2, 0) + 1.0) / 2.0, 0.0, 1.0)
    return rgb_to_hsv(rgb)


def decode_measurements(image: np.ndarray) -> Optional[Dict[str, float]]:
    """
    Raw measurements the oracle decides on, or ``None`` when no face-like
    ellipse is present.
    """
    hsv = _to_hsv(image)
    r = hsv.shape[0]
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    mask = (s > MASK_SAT) & (v > MASK_VAL)
    area = int(mask.sum())
    if area < MIN_AREA_FRAC * r * r:
        return None

    angles = 2.0 * np.pi * h[mask]
    cs, sn = np.cos(angles).mean(), np.sin(angles).mean()
    resultant = float(np.hypot(cs, sn))
    if resultant < MIN_HUE_RESULTANT:
        return None

    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    extent = int(rows[-1] - rows[0] + 1)
    width = int(cols[-1] - cols[0] + 1)
    fill = area / float(extent * width)
    if not FILL_RANGE[0] <= fill <= FILL_RANGE[1]:
        return None

    median_v = float(np.median(v[mask]))
    wrinkles = 0
    for row in rows:
        on = mask[row]
        if (v[row, on] < WRINKLE_REL * median_v).mean() > 0.5:
            wrinkles += 1

    top = int(rows[0])
    cx = (cols[0] + cols[-1]) / 2.0
    rx = 0.28 * r
    bh = max(2, int(round(0.08 * r)))
    r0, r1 = max(0, top - 1 - bh), max(0, top - 1)
    c0, c1 = max(0, int(np.ceil(cx - rx))), min(r, int(np.floor(cx + rx)) + 1)
    band = v[r0:r1, c0:c1]
    dark = float((band < DARK_VAL).mean()) if band.size else 0.0

    return {
        "hue": float(np.arctan2(sn, cs) / (2.0 * np.pi)) % 1.0,
        "resultant": resultant,
        "extent": extent,
        "wrinkles": wrinkles,
        "dark_fraction": dark,
        "area": area,
        "fill": fill,
    }


def oracle_classify(image: np.ndarray, space: AttributeSpace) -> Optional[AttributeLabel]:
    """
    Decode a ``(3, H, W)`` image in ``[−1, 1]`` into an :class:`AttributeLabel`;
    ``None`` means unclassifiable.
    """
    m = decode_measurements(image)
    if m is None:
        return None

    hue_dist = [abs((m["hue"] - HUE_TABLE[k] + 0.5) % 1.0 - 0.5) for k in range(space.n_c)]
    race = int(np.argmin(hue_dist))

    templates = _template_extents(int(np.asarray(image).shape[-1]), space.n_a)
    dist = [abs(m["extent"] - t) for t in templates]
    best = min(dist)
    candidates = [a for a, d in enumerate(dist) if d == best]
    age = min(candidates, key=lambda a: (abs(m["wrinkles"] - a), a))

    gender = 1 if space.n_g > 1 and m["dark_fraction"] > 0.5 else 0
    return AttributeLabel(age, gender, race)


class SyntheticOracle:
    """Classifier plug-in wrapping :func:`oracle_classify` for one space."""

    def __init__(self, space: AttributeSpace):
        self.space = space

    def __call__(self, image: np.ndarray) -> Optional[AttributeLabel]:
        return oracle_classify(image, self.space)


# ───────────────────────────────────────────────────────────────────────────
#  CLI preview
# ───────────────────────────────────────────────────────────────────────────
def _cli() -> None:
    from adgan.grid import grid_emit

    ap = argparse.ArgumentParser(description="Render one synthetic face per label into a PNG grid")
    ap.add_argument("--resolution", type=int, default=32)
    ap.add_argument("--n-a", type=int, default=3)
    ap.add_argument("--n-g", type=int, default=2)
    ap.add_argument("--n-c", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="synthetic_preview.png")
    args = ap.parse_args()

    spec = SyntheticSpec(args.resolution, args.n_a, args.n_g, args.n_c, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    images = [synth_generate(lb, spec, rng) for lb in spec.space.labels()]
    grid_emit(images, (spec.n_a, spec.n_g * spec.n_c), args.out)
    print(f"wrote {len(images)} faces to {args.out}")


if __name__ == "__main__":
    _cli()
