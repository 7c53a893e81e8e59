"""
adgan.grid
----------
Tile model images into one PNG, figure style.

Canvas size is ``cols·w + (cols−1)·gap`` by ``rows·h + (rows−1)·gap``; tiles
fill row by row, unused cells stay background.  Pixel values map linearly
from ``[−1, 1]`` to ``[0, 255]``.
"""
from __future__ import annotations

import io
import logging
import posixpath
from typing import Iterable, Optional, Sequence, Tuple

import fsspec
import numpy as np
from PIL import Image, ImageDraw

from adgan.errors import DataError, ShapeError
from adgan.utils.preprocessing import to_uint8

LOGGER = logging.getLogger(__name__)

GAP_COLOUR = (255, 255, 255)
FRAME_COLOUR = (255, 0, 0)


def grid_image(
    images: Sequence[np.ndarray],
    layout: Tuple[int, int],
    gap: int = 2,
    framed: Iterable[int] = (),
) -> Image.Image:
    """
    Build the canvas.  Tiles listed in *framed* (by position) get a one-pixel
    frame drawn on their outermost pixels.
    """
    rows, cols = layout
    if not images:
        raise ShapeError("grid needs at least one image")
    if rows * cols < len(images):
        raise ShapeError(f"{len(images)} images do not fit a {rows}×{cols} grid")
    shape = np.asarray(images[0]).shape
    if any(np.asarray(im).shape != shape for im in images):
        raise ShapeError("grid images must share one shape")
    _, h, w = shape

    canvas = Image.new("RGB", (cols * w + (cols - 1) * gap, rows * h + (rows - 1) * gap), GAP_COLOUR)
    draw = ImageDraw.Draw(canvas)
    framed = set(framed)
    for k, im in enumerate(images):
        r, c = divmod(k, cols)
        x, y = c * (w + gap), r * (h + gap)
        canvas.paste(Image.fromarray(to_uint8(im)), (x, y))
        if k in framed:
            draw.rectangle([x, y, x + w - 1, y + h - 1], outline=FRAME_COLOUR, width=1)
    return canvas


def grid_emit(
    images: Sequence[np.ndarray],
    layout: Tuple[int, int],
    path: str,
    gap: int = 2,
    framed: Optional[Iterable[int]] = None,
) -> str:
    """Write the grid as a lossless PNG to *path* (local or fsspec URI)."""
    canvas = grid_image(images, layout, gap, framed or ())
    buf = io.BytesIO()
    canvas.save(buf, format="PNG")
    try:
        fs, fs_path = fsspec.core.url_to_fs(str(path))
        parent = posixpath.dirname(fs_path)
        if parent:
            fs.makedirs(parent, exist_ok=True)
        with fs.open(fs_path, "wb") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise DataError(f"cannot write grid to {path}: {exc}") from exc
    LOGGER.info("🖼️  grid %dx%d → %s (%dx%d px)", layout[0], layout[1], path, *canvas.size)
    return str(path)
