#!/usr/bin/env python3

"""
adgan.utils.preprocessing
-------------------------
Light-weight, stateless image helpers used by the data pipeline and the grid
writer.

Functions here are *pure*: same bytes in, same array out.  Images move
between three conventions:

* files / PIL images          uint8 RGB, ``(H, W, 3)``
* working arrays              float64 in ``[0, 255]``, ``(H, W, 3)``
* model tensors               float in ``[−1, 1]``, ``(3, H, W)``
"""
from __future__ import annotations

import io
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

PathOrBytes = Union[str, Path, bytes]


# ───────────────────────────────────────────────────────────────────────────
#  Decoding and resampling
# ───────────────────────────────────────────────────────────────────────────
def decode_image(source: PathOrBytes) -> np.ndarray:
    """
    Read an image file (or raw bytes) as float64 RGB ``(H, W, 3)`` in
    ``[0, 255]``.  Raises ``OSError`` / ``PIL.UnidentifiedImageError`` when
    the data is not an image.
    """
    fh = io.BytesIO(source) if isinstance(source, bytes) else source
    with Image.open(fh) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64)


def resize_bilinear(rgb: np.ndarray, resolution: int) -> np.ndarray:
    """
    Bilinear resize of an ``(H, W, 3)`` array to ``resolution × resolution``.

    Each channel is resampled as a 32-bit float ("F" mode) image so no
    quantization happens between decode and scaling.
    """
    if rgb.shape[:2] == (resolution, resolution):
        return rgb.astype(np.float64)
    channels = [
        np.asarray(
            Image.fromarray(np.ascontiguousarray(rgb[..., c], dtype=np.float32))
            .resize((resolution, resolution), Image.BILINEAR),
            dtype=np.float64,
        )
        for c in range(rgb.shape[-1])
    ]
    return np.stack(channels, axis=-1)


def to_model_range(rgb: np.ndarray) -> np.ndarray:
    """``(H, W, 3)`` in ``[0, 255]`` → ``(3, H, W)`` in ``[−1, 1]``."""
    return np.clip(rgb.transpose(2, 0, 1) / 127.5 - 1.0, -1.0, 1.0)


def to_uint8(image: np.ndarray) -> np.ndarray:
    """``(3, H, W)`` in ``[−1, 1]`` → ``(H, W, 3)`` uint8, linear map, clipped."""
    arr = np.clip((np.asarray(image, dtype=np.float64) + 1.0) * 127.5, 0.0, 255.0)
    return np.rint(arr.transpose(1, 2, 0)).astype(np.uint8)


def load_image(source: PathOrBytes, resolution: int) -> np.ndarray:
    """Decode, resize and scale in one go: the model-ready ``(3, R, R)`` array."""
    return to_model_range(resize_bilinear(decode_image(source), resolution))


def encode_png(image: np.ndarray) -> bytes:
    """Lossless PNG bytes for a ``(3, H, W)`` image in ``[−1, 1]``."""
    buf = io.BytesIO()
    Image.fromarray(to_uint8(image)).save(buf, format="PNG")
    return buf.getvalue()
