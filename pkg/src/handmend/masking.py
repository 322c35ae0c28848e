"""Binary masks and control-image rasterization.

Masks mark the region to restore (on = restore). All rasterization uses the
pixel-center rule: pixel (i, j) has its center at (i + 0.5, j + 0.5) and is
covered when that center falls inside the half-open shape extent, so
boundary pixels are decided identically everywhere. On disk masks are
single-channel PNGs with 255 = on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import raster
from .geometry import PlacementTransform, placement_matrix
from .templates import TemplateSpec


class EmptyAfterClamp(ValueError):
    """Box clamped to the image has zero area."""


class DimensionMismatch(ValueError):
    """Masks (or mask and image) do not share dimensions."""


class TemplateFullyOutside(ValueError):
    """The transformed template rectangle misses the image entirely."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in image pixel coordinates, corners (x1, y1)-(x2, y2)."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError("box coordinates must be finite")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(
                f"box must have positive extent, got ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def area(self) -> float:
        return self.width * self.height

    def contains_point(self, x: float, y: float) -> bool:
        return self.x1 <= x <= self.x2 and self.y1 <= y <= self.y2

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class MaskLayer:
    """Binary raster aligned to the working image; on = region to restore."""

    width: int
    height: int
    bits: np.ndarray  # bool, shape (height, width)

    def __post_init__(self) -> None:
        if self.bits.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"mask bits shape {self.bits.shape} != (height={self.height}, width={self.width})"
            )
        if self.bits.dtype != np.bool_:
            object.__setattr__(self, "bits", self.bits.astype(bool))

    @classmethod
    def blank(cls, width: int, height: int) -> "MaskLayer":
        return cls(width, height, np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "MaskLayer":
        return cls(width, height, np.ones((height, width), dtype=bool))

    def on_count(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not self.bits.any()

    def contains(self, other: "MaskLayer") -> bool:
        """True when every on-pixel of ``other`` is on here (set inclusion)."""
        self._check_same_shape(other)
        return bool(np.all(self.bits | ~other.bits))

    def to_array(self) -> np.ndarray:
        """The mask as a uint8 grid, 255 = on."""
        return np.where(self.bits, 255, 0).astype(np.uint8)

    def to_bytes_png(self) -> bytes:
        return raster.gray_png_bytes(self.to_array())

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes_png())

    @classmethod
    def load(cls, path: str | Path) -> "MaskLayer":
        gray = raster.gray_from_png_bytes(Path(path).read_bytes())
        h, w = gray.shape
        return cls(w, h, gray >= 128)

    def _check_same_shape(self, other: "MaskLayer") -> None:
        if (self.width, self.height) != (other.width, other.height):
            raise DimensionMismatch(
                f"mask {other.width}x{other.height} does not match {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class ControlImage:
    """Black canvas carrying placed template pixels; dims match the image."""

    width: int
    height: int
    raster: np.ndarray  # uint8, shape (height, width, 3)

    def __post_init__(self) -> None:
        if self.raster.shape != (self.height, self.width, 3):
            raise DimensionMismatch(
                f"control raster shape {self.raster.shape} != ({self.height}, {self.width}, 3)"
            )

    @classmethod
    def blank(cls, width: int, height: int) -> "ControlImage":
        return cls(width, height, np.zeros((height, width, 3), dtype=np.uint8))

    def save(self, path: str | Path) -> None:
        raster.save_rgb(path, self.raster)


def expand_box(
    box: BoundingBox, ratio: float, image_w: float, image_h: float
) -> BoundingBox:
    """Grow width and height by (1 + ratio) about the box center, then clamp.

    Raises:
        EmptyAfterClamp: if nothing of the grown box lies inside the image.
    """
    if ratio < 0:
        raise ValueError(f"expand ratio must be >= 0, got {ratio}")
    cx, cy = box.center
    half_w = box.width * (1.0 + ratio) / 2.0
    half_h = box.height * (1.0 + ratio) / 2.0
    x1 = max(0.0, cx - half_w)
    y1 = max(0.0, cy - half_h)
    x2 = min(float(image_w), cx + half_w)
    y2 = min(float(image_h), cy + half_h)
    if not (x1 < x2 and y1 < y2):
        raise EmptyAfterClamp(f"box {box.as_tuple()} empty after clamp to {image_w}x{image_h}")
    return BoundingBox(x1, y1, x2, y2)


def clamp_box(box: BoundingBox, image_w: float, image_h: float) -> BoundingBox:
    """Clamp a box to the image; same as expand_box with ratio 0."""
    return expand_box(box, 0.0, image_w, image_h)


def _covered_range(lo: float, hi: float, count: int) -> tuple[int, int]:
    """Pixel index range [start, stop) whose centers fall in [lo, hi)."""
    start = max(0, math.ceil(lo - 0.5))
    stop = min(count, math.ceil(hi - 0.5))
    return start, stop


def rasterize_box(box: BoundingBox, image_w: int, image_h: int) -> MaskLayer:
    """Rasterize a box: pixels whose centers lie inside [x1, x2) x [y1, y2)."""
    mask = np.zeros((image_h, image_w), dtype=bool)
    x_start, x_stop = _covered_range(box.x1, box.x2, image_w)
    y_start, y_stop = _covered_range(box.y1, box.y2, image_h)
    if x_start < x_stop and y_start < y_stop:
        mask[y_start:y_stop, x_start:x_stop] = True
    return MaskLayer(image_w, image_h, mask)


def union_masks(masks: list[MaskLayer]) -> MaskLayer:
    """Pixelwise OR of equally sized masks."""
    if not masks:
        raise ValueError("union_masks needs at least one mask")
    first = masks[0]
    bits = first.bits.copy()
    for m in masks[1:]:
        first._check_same_shape(m)
        bits |= m.bits
    return MaskLayer(first.width, first.height, bits)


def rasterize_template(
    template: TemplateSpec,
    transform: PlacementTransform,
    image_w: int,
    image_h: int,
) -> tuple[ControlImage, MaskLayer]:
    """Resample a placed template into a control image plus its mask.

    The control image gets the template raster bilinearly resampled under the
    transform (reads outside the source are black); the mask is the image of
    the template's full rectangle under the same transform, rasterized with
    the pixel-center rule. Pixels off the mask are forced to exact black so
    the control image never leaks resampling bleed.

    Raises:
        TemplateFullyOutside: no destination pixel center maps into the
            template rectangle.
    """
    m00, m01, m10, m11, tx, ty = placement_matrix(transform)
    det = m00 * m11 - m01 * m10
    if abs(det) < 1e-12:
        raise TemplateFullyOutside("placement collapses the template to zero area")
    # inverse affine: src = A_inv @ (dst - t)
    i00, i01 = m11 / det, -m01 / det
    i10, i11 = -m10 / det, m00 / det

    th, tw = template.raster.shape[:2]

    # forward-map the template rectangle corners to bound the destination window
    corners = [(0.0, 0.0), (tw, 0.0), (0.0, th), (tw, th)]
    xs = [m00 * cx + m01 * cy + tx for cx, cy in corners]
    ys = [m10 * cx + m11 * cy + ty for cx, cy in corners]
    # window padded by one pixel each side; the inside test below is exact
    x_start, x_stop = _covered_range(min(xs) - 1.0, max(xs) + 1.0, image_w)
    y_start, y_stop = _covered_range(min(ys) - 1.0, max(ys) + 1.0, image_h)
    if x_start >= x_stop or y_start >= y_stop:
        raise TemplateFullyOutside("transformed template lies outside the image")

    cols = np.arange(x_start, x_stop, dtype=np.float64) + 0.5
    rows = np.arange(y_start, y_stop, dtype=np.float64) + 0.5
    dx = cols[np.newaxis, :] - tx
    dy = rows[:, np.newaxis] - ty
    sx = i00 * dx + i01 * dy
    sy = i10 * dx + i11 * dy

    inside = (sx >= 0.0) & (sx < tw) & (sy >= 0.0) & (sy < th)
    if not inside.any():
        raise TemplateFullyOutside("transformed template lies outside the image")

    window = _bilinear_sample(template.raster, sx, sy)
    window[~inside] = 0

    control = np.zeros((image_h, image_w, 3), dtype=np.uint8)
    control[y_start:y_stop, x_start:x_stop] = window
    bits = np.zeros((image_h, image_w), dtype=bool)
    bits[y_start:y_stop, x_start:x_stop] = inside
    return ControlImage(image_w, image_h, control), MaskLayer(image_w, image_h, bits)


def _bilinear_sample(source: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Bilinear sample at continuous coords; out-of-source support reads black.

    Source pixel (i, j) is the sample at center (i + 0.5, j + 0.5). A one
    pixel black border supplies the zero padding outside the raster.
    """
    h, w = source.shape[:2]
    padded = np.zeros((h + 2, w + 2, 3), dtype=np.float64)
    padded[1 : h + 1, 1 : w + 1] = source

    u = sx + 0.5  # +1 border index shift, -0.5 center offset
    v = sy + 0.5
    u0 = np.clip(np.floor(u).astype(np.int64), 0, w + 1)
    v0 = np.clip(np.floor(v).astype(np.int64), 0, h + 1)
    u1 = np.clip(u0 + 1, 0, w + 1)
    v1 = np.clip(v0 + 1, 0, h + 1)
    fu = (u - u0)[..., np.newaxis]
    fv = (v - v0)[..., np.newaxis]

    top = padded[v0, u0] * (1 - fu) + padded[v0, u1] * fu
    bottom = padded[v1, u0] * (1 - fu) + padded[v1, u1] * fu
    out = top * (1 - fv) + bottom * fv
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
