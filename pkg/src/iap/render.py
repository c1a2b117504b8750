"""Classification maps as 8-bit RGB PNG images."""

from __future__ import annotations

import io
import zlib

import numpy as np
from PIL import Image

from .cube_io import atomic_write_bytes
from .errors import ValidationError

MAX_CLASSES = 255


def class_color(cid: int) -> tuple:
    """Fixed colour for a class id (0 is black); derived from a hash of the id."""
    if cid == 0:
        return (0, 0, 0)
    h = zlib.crc32(f"class-{cid}".encode())
    rgb = [(h >> s) & 0xFF for s in (0, 8, 16)]
    # keep every class visibly distinct from the black background
    return tuple(64 + (c * 191) // 255 for c in rgb)


def palette(n_classes: int) -> np.ndarray:
    if n_classes > MAX_CLASSES:
        raise ValidationError(f"{n_classes} classes exceed the {MAX_CLASSES}-colour palette")
    return np.array([class_color(c) for c in range(n_classes + 1)], np.uint8)


def render_map(labels) -> np.ndarray:
    """``(H, W)`` class ids to an ``(H, W, 3)`` uint8 image."""
    lab = np.asarray(labels)
    if lab.ndim != 2:
        raise ValidationError("label raster must be 2-D")
    if lab.size and lab.min() < 0:
        raise ValidationError("label raster has negative ids")
    top = int(lab.max()) if lab.size else 0
    return palette(top)[lab.astype(np.int64)]


def png_bytes(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(rgb, "RGB").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def save_map(labels, path):
    atomic_write_bytes(path, png_bytes(render_map(labels)))
