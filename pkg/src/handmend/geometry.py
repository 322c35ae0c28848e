"""Pure 2D geometry for hand restoration.

Coordinate convention: image pixels, origin at the top-left corner, x grows
rightward, y grows downward. All operations here are pure functions over
immutable values and are safe to call concurrently.

A hand is summarized by four landmarks a (wrist), b, c, d. The base vector
v1 = c - a carries size and orientation; v2 = d - b is only used to classify
chirality via the sign of the 2D cross product v1 x v2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .templates import TemplateSpec

EPS_LEN = 1e-9
EPS_CROSS = 1e-9


class IndeterminateChirality(ValueError):
    """Cross product too close to zero: parallel or degenerate landmark vectors."""


class DegenerateBaseVector(ValueError):
    """|v1| (or the template's |v1'|) is too small to align against."""


class Chirality(Enum):
    CW = "CW"
    CCW = "CCW"


class RotationDirection(Enum):
    CLOCKWISE = "clockwise"
    COUNTERCLOCKWISE = "counterclockwise"
    NONE = "none"


@dataclass(frozen=True)
class Point2:
    """A point (or displacement) in image pixel coordinates."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")

    def __sub__(self, other: "Point2") -> "Point2":
        return Point2(self.x - other.x, self.y - other.y)

    def __add__(self, other: "Point2") -> "Point2":
        return Point2(self.x + other.x, self.y + other.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class HandLandmarkSet:
    """The four hand keypoints a (wrist), b, c, d in pixel coordinates.

    ``source`` records whether the set came from a pose estimate or from a
    template annotation; it does not affect any computation.
    """

    a: Point2
    b: Point2
    c: Point2
    d: Point2
    source: str = "pose-estimate"

    def __post_init__(self) -> None:
        if self.source not in ("pose-estimate", "template-annotation"):
            raise ValueError(f"unknown landmark source {self.source!r}")

    @property
    def v1(self) -> Point2:
        return self.c - self.a

    @property
    def v2(self) -> Point2:
        return self.d - self.b

    def items(self) -> tuple[tuple[str, Point2], ...]:
        return (("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d))


@dataclass(frozen=True)
class PlacementTransform:
    """The solved flip -> scale -> translate -> rotate placing a template.

    ``flip_axis_x`` is the template width used for the horizontal mirror
    (mirror line x = flip_axis_x / 2); it travels with the transform so that
    :func:`apply_placement` stays a pure function of (transform, point).
    ``rotation_angle`` is in [0, pi]; the direction disambiguates which way
    to turn. ``pivot`` is the rotation center in image coordinates.
    """

    flipped: bool
    flip_axis_x: float
    scale: float
    translation: Point2
    rotation_angle: float
    rotation_direction: RotationDirection
    pivot: Point2

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if (self.rotation_angle == 0.0) != (self.rotation_direction is RotationDirection.NONE):
            raise ValueError("rotation_angle is 0 exactly when rotation_direction is NONE")


def identity_transform() -> PlacementTransform:
    return PlacementTransform(
        flipped=False,
        flip_axis_x=0.0,
        scale=1.0,
        translation=Point2(0.0, 0.0),
        rotation_angle=0.0,
        rotation_direction=RotationDirection.NONE,
        pivot=Point2(0.0, 0.0),
    )


def cross(u: Point2, v: Point2) -> float:
    """Scalar 2D cross product u.x * v.y - u.y * v.x."""
    return u.x * v.y - u.y * v.x


def compute_chirality(landmarks: HandLandmarkSet) -> Chirality:
    """Classify hand orientation from the sign of v1 x v2.

    Negative cross product means a CW hand, positive means CCW. The cross
    product is normalized by |v1||v2| before the epsilon test so that the
    degeneracy threshold is scale invariant.

    Raises:
        IndeterminateChirality: if either vector is (near) zero or the two
            vectors are (near) parallel.
    """
    v1, v2 = landmarks.v1, landmarks.v2
    n1, n2 = v1.norm(), v2.norm()
    if n1 <= EPS_LEN or n2 <= EPS_LEN:
        raise IndeterminateChirality("landmark vectors v1/v2 must be nonzero")
    normalized = cross(v1, v2) / (n1 * n2)
    if abs(normalized) <= EPS_CROSS:
        raise IndeterminateChirality(
            f"landmark vectors are parallel (normalized cross {normalized:.3e})"
        )
    return Chirality.CW if normalized < 0 else Chirality.CCW


def _flip_point(p: Point2, width: float) -> Point2:
    """Mirror about the vertical centerline x = width / 2."""
    return Point2(width - p.x, p.y)


def solve_placement(
    hand: HandLandmarkSet,
    hand_chirality: Chirality,
    template: "TemplateSpec",
) -> PlacementTransform:
    """Solve the transform placing ``template`` onto ``hand``.

    Steps mirror the placement procedure: flip the template when its
    chirality disagrees with the hand, scale by |v1| / |v1'|, translate so
    the template wrist a' lands on the hand wrist a, then rotate about a by
    the angle between v1' and v1 (v1' taken after any flip).

    Raises:
        DegenerateBaseVector: when |v1| or |v1'| is too small.
    """
    flipped = hand_chirality is not template.chirality
    width = float(template.width)

    t_lm = template.landmarks
    a_t, c_t = t_lm.a, t_lm.c
    if flipped:
        a_t, c_t = _flip_point(a_t, width), _flip_point(c_t, width)

    v1 = hand.v1
    v1t = c_t - a_t
    n1, nt = v1.norm(), v1t.norm()
    if n1 <= EPS_LEN:
        raise DegenerateBaseVector(f"hand base vector |v1| = {n1:.3e}")
    if nt <= EPS_LEN:
        raise DegenerateBaseVector(f"template base vector |v1'| = {nt:.3e}")

    scale = n1 / nt
    cos_theta = (v1.x * v1t.x + v1.y * v1t.y) / (n1 * nt)
    theta = math.acos(max(-1.0, min(1.0, cos_theta)))

    if theta == 0.0:
        direction = RotationDirection.NONE
    elif cross(v1, v1t) > 0:
        direction = RotationDirection.CLOCKWISE
    else:
        direction = RotationDirection.COUNTERCLOCKWISE

    translation = Point2(hand.a.x - scale * a_t.x, hand.a.y - scale * a_t.y)
    return PlacementTransform(
        flipped=flipped,
        flip_axis_x=width,
        scale=scale,
        translation=translation,
        rotation_angle=theta,
        rotation_direction=direction,
        pivot=hand.a,
    )


def _rotation_terms(transform: PlacementTransform) -> tuple[float, float]:
    """(cos, sin) with sin signed for the stored direction.

    COUNTERCLOCKWISE uses the matrix [[c, -s], [s, c]] on raw (x, y); applied
    at pi/2 it takes (1, 0) to (0, 1). CLOCKWISE is its transpose. The sign
    rule in solve_placement (cross(v1, v1') > 0 => clockwise) pairs with this
    so the rotation always turns v1' onto v1.
    """
    c = math.cos(transform.rotation_angle)
    s = math.sin(transform.rotation_angle)
    if transform.rotation_direction is RotationDirection.CLOCKWISE:
        s = -s
    elif transform.rotation_direction is RotationDirection.NONE:
        s = 0.0
    return c, s


def apply_placement(transform: PlacementTransform, point: Point2) -> Point2:
    """Apply flip, then scale, then translation, then rotation about the pivot."""
    x, y = point.x, point.y
    if transform.flipped:
        x = transform.flip_axis_x - x
    x = transform.scale * x + transform.translation.x
    y = transform.scale * y + transform.translation.y
    dx, dy = x - transform.pivot.x, y - transform.pivot.y
    c, s = _rotation_terms(transform)
    return Point2(
        c * dx - s * dy + transform.pivot.x,
        s * dx + c * dy + transform.pivot.y,
    )


def scale_about_pivot(transform: PlacementTransform, factor: float) -> PlacementTransform:
    """Compose an extra uniform scale about the transform's pivot.

    Used for the wrist-anchored expand ratio: the pivot (wrist) stays fixed
    while everything else grows by ``factor``.
    """
    if factor <= 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    new_translation = Point2(
        factor * transform.translation.x + (1.0 - factor) * transform.pivot.x,
        factor * transform.translation.y + (1.0 - factor) * transform.pivot.y,
    )
    return replace(transform, scale=factor * transform.scale, translation=new_translation)


def placement_matrix(transform: PlacementTransform) -> tuple[float, float, float, float, float, float]:
    """Flatten the placement into an affine map (m00, m01, m10, m11, tx, ty).

    Maps template coordinates p to image coordinates: x' = m00*x + m01*y + tx,
    y' = m10*x + m11*y + ty. Raster code inverts this for resampling.
    """
    c, s = _rotation_terms(transform)
    sc = transform.scale
    fx = -1.0 if transform.flipped else 1.0
    f_off = transform.flip_axis_x if transform.flipped else 0.0

    # linear part: R @ diag(scale) @ flip
    m00 = c * sc * fx
    m01 = -s * sc
    m10 = s * sc * fx
    m11 = c * sc

    # offset: R @ (scale*f_off + t - pivot) + pivot
    ox = sc * f_off + transform.translation.x - transform.pivot.x
    oy = transform.translation.y - transform.pivot.y
    tx = c * ox - s * oy + transform.pivot.x
    ty = s * ox + c * oy + transform.pivot.y
    return (m00, m01, m10, m11, tx, ty)
