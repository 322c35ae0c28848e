"""Small PNG/array helpers shared across the pipeline.

Rasters are numpy uint8 arrays: RGB images are (h, w, 3), single-channel
masks are (h, w). PNG encoding goes through Pillow, which is deterministic
for fixed pixel content (no timestamps), so artifact trees are reproducible.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image


def to_rgb_array(image: Image.Image) -> np.ndarray:
    return np.asarray(image.convert("RGB"), dtype=np.uint8)


def load_rgb(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return to_rgb_array(img)


def save_rgb(path: str | Path, array: np.ndarray) -> None:
    Image.fromarray(_as_rgb(array), mode="RGB").save(path, format="PNG")


def rgb_png_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(_as_rgb(array), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def rgb_from_png_bytes(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        return to_rgb_array(img)


def gray_png_bytes(array: np.ndarray) -> bytes:
    if array.ndim != 2:
        raise ValueError(f"expected a 2D single-channel array, got shape {array.shape}")
    buf = io.BytesIO()
    Image.fromarray(array.astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def gray_from_png_bytes(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


def _as_rgb(array: np.ndarray) -> np.ndarray:
    arr = np.asarray(array, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (h, w, 3) RGB array, got shape {arr.shape}")
    return arr
