"""Backend interfaces for the four external inference stages.

The pipeline never talks to a concrete engine directly; it goes through
these interfaces. Every interface has a deterministic in-tree mock (see
:mod:`.mocks`) so the whole test suite runs without any model weights.

Concurrency contract: a backend instance accepts one in-flight call at a
time unless it sets ``reentrant = True``. Mocks are pure functions of their
inputs and declare themselves reentrant.
"""

from __future__ import annotations

import abc
import dataclasses
import math
from enum import IntEnum

import numpy as np

from ..geometry import HandLandmarkSet, Point2
from ..masking import BoundingBox, ControlImage, MaskLayer


class BackendError(RuntimeError):
    """Base class for backend failures."""


class BackendUnavailable(BackendError):
    """The engine cannot be reached at all (not installed, socket down)."""


class InferenceFailure(BackendError):
    """The engine ran but reported an error; the message is passed through."""


class NoPersonDetected(BackendError):
    """Pose estimation found no person. Recoverable: the step fails but the
    session survives and the step may be re-run."""


class HandLabel(IntEnum):
    STANDARD = 0
    NON_STANDARD = 1


@dataclasses.dataclass(frozen=True)
class HandDetection:
    """One detected hand: its box, class label and confidence."""

    box: BoundingBox
    label: HandLabel
    confidence: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0) or not math.isfinite(self.confidence):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        object.__setattr__(self, "label", HandLabel(self.label))


POSE_LANDMARK_NAMES: tuple[str, ...] = (
    "nose",
    "left_eye_inner",
    "left_eye",
    "left_eye_outer",
    "right_eye_inner",
    "right_eye",
    "right_eye_outer",
    "left_ear",
    "right_ear",
    "mouth_left",
    "mouth_right",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_pinky",
    "right_pinky",
    "left_index",
    "right_index",
    "left_thumb",
    "right_thumb",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
    "left_heel",
    "right_heel",
    "left_foot_index",
    "right_foot_index",
)

_NAME_TO_INDEX = {name: i for i, name in enumerate(POSE_LANDMARK_NAMES)}

_CONNECTION_NAMES: tuple[tuple[str, str], ...] = (
    ("nose", "left_eye_inner"),
    ("left_eye_inner", "left_eye"),
    ("left_eye", "left_eye_outer"),
    ("left_eye_outer", "left_ear"),
    ("nose", "right_eye_inner"),
    ("right_eye_inner", "right_eye"),
    ("right_eye", "right_eye_outer"),
    ("right_eye_outer", "right_ear"),
    ("mouth_left", "mouth_right"),
    ("left_shoulder", "right_shoulder"),
    ("left_shoulder", "left_elbow"),
    ("left_elbow", "left_wrist"),
    ("left_wrist", "left_pinky"),
    ("left_wrist", "left_index"),
    ("left_wrist", "left_thumb"),
    ("left_pinky", "left_index"),
    ("right_shoulder", "right_elbow"),
    ("right_elbow", "right_wrist"),
    ("right_wrist", "right_pinky"),
    ("right_wrist", "right_index"),
    ("right_wrist", "right_thumb"),
    ("right_pinky", "right_index"),
    ("left_shoulder", "left_hip"),
    ("right_shoulder", "right_hip"),
    ("left_hip", "right_hip"),
    ("left_hip", "left_knee"),
    ("left_knee", "left_ankle"),
    ("left_ankle", "left_heel"),
    ("left_heel", "left_foot_index"),
    ("left_ankle", "left_foot_index"),
    ("right_hip", "right_knee"),
    ("right_knee", "right_ankle"),
    ("right_ankle", "right_heel"),
    ("right_heel", "right_foot_index"),
    ("right_ankle", "right_foot_index"),
)

POSE_CONNECTIONS: tuple[tuple[int, int], ...] = tuple(
    (_NAME_TO_INDEX[u], _NAME_TO_INDEX[v]) for u, v in _CONNECTION_NAMES
)


@dataclasses.dataclass(frozen=True)
class PoseLandmark:
    name: str
    point: Point2
    visibility: float

    def __post_init__(self) -> None:
        if self.name not in _NAME_TO_INDEX:
            raise ValueError(f"unknown pose landmark name {self.name!r}")
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility}")


@dataclasses.dataclass(frozen=True)
class BodyPoseResult:
    """A whole-body skeleton plus the per-hand landmark quadruples.

    ``landmarks`` is the full 33-point topology in canonical order; a hand
    entry is None when the estimator did not predict that hand.
    """

    landmarks: tuple[PoseLandmark, ...]
    left_hand: HandLandmarkSet | None = None
    right_hand: HandLandmarkSet | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "landmarks", tuple(self.landmarks))
        if len(self.landmarks) != len(POSE_LANDMARK_NAMES):
            raise ValueError(
                f"expected {len(POSE_LANDMARK_NAMES)} landmarks, got {len(self.landmarks)}"
            )
        for lm, expected in zip(self.landmarks, POSE_LANDMARK_NAMES):
            if lm.name != expected:
                raise ValueError(f"landmark order violation: got {lm.name!r}, expected {expected!r}")

    def landmark(self, name: str) -> PoseLandmark:
        return self.landmarks[_NAME_TO_INDEX[name]]

    def hands(self) -> tuple[tuple[str, HandLandmarkSet], ...]:
        """Predicted hands as (side, landmark set) pairs, left first."""

        out = []
        if self.left_hand is not None:
            out.append(("left", self.left_hand))
        if self.right_hand is not None:
            out.append(("right", self.right_hand))
        return tuple(out)


def hand_set_from_pose(result: BodyPoseResult, side: str) -> HandLandmarkSet:
    """Build the four-point hand set for ``side`` from the full skeleton.

    Letter mapping: a = wrist, b = thumb, c = index, d = pinky. The index
    landmark acts as the fingertip end of the base vector a->c.
    """

    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return HandLandmarkSet(
        a=result.landmark(f"{side}_wrist").point,
        b=result.landmark(f"{side}_thumb").point,
        c=result.landmark(f"{side}_index").point,
        d=result.landmark(f"{side}_pinky").point,
        source="pose-estimate",
    )


@dataclasses.dataclass(frozen=True)
class InpaintRequest:
    """Input bundle for control-guided inpainting."""

    image: np.ndarray
    mask: MaskLayer
    control: ControlImage | None
    prompt: str
    negative_prompt: str | None
    seed: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.image, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"image must be (h, w, 3) uint8, got shape {arr.shape}")
        object.__setattr__(self, "image", arr)
        h, w = arr.shape[:2]
        if (self.mask.width, self.mask.height) != (w, h):
            raise ValueError(
                f"mask {self.mask.width}x{self.mask.height} does not match image {w}x{h}"
            )
        if self.control is not None:
            ch, cw = self.control.raster.shape[:2]
            if (cw, ch) != (w, h):
                raise ValueError(f"control {cw}x{ch} does not match image {w}x{h}")
        if not self.prompt:
            raise ValueError("prompt must be non-empty")


class Detector(abc.ABC):
    """Hand detector returning labeled, confidence-scored boxes."""

    reentrant: bool = False

    @abc.abstractmethod
    def detect(self, image: np.ndarray) -> list[HandDetection]:
        """Return detections clamped to image bounds, confidence descending."""


class PoseEstimator(abc.ABC):
    """Whole-body pose estimator."""

    reentrant: bool = False

    @abc.abstractmethod
    def estimate(self, image: np.ndarray) -> BodyPoseResult:
        """Return the skeleton, raising NoPersonDetected when applicable."""


class ControlInpainter(abc.ABC):
    """Masked, control-guided image restoration."""

    reentrant: bool = False

    @abc.abstractmethod
    def inpaint(self, request: InpaintRequest) -> np.ndarray:
        """Return an RGB raster; mask-off pixels must equal the input."""


class InstructionInpainter(abc.ABC):
    """Whole-image instruction-driven editing (no mask)."""

    reentrant: bool = False

    @abc.abstractmethod
    def edit(self, image: np.ndarray, instruction: str, seed: int) -> np.ndarray:
        """Return an RGB raster of the same dimensions as the input."""


def finalize_detections(
    raw: list[HandDetection], image_w: int, image_h: int
) -> list[HandDetection]:
    """Clamp boxes to image bounds and order deterministically.

    Boxes partially outside are clamped; boxes that end up degenerate
    (no interior left) are dropped since no valid box can represent them.
    Order: confidence descending, ties by (y1, x1).
    """

    clamped: list[HandDetection] = []
    for det in raw:
        x1 = max(0.0, min(det.box.x1, float(image_w)))
        x2 = max(0.0, min(det.box.x2, float(image_w)))
        y1 = max(0.0, min(det.box.y1, float(image_h)))
        y2 = max(0.0, min(det.box.y2, float(image_h)))
        if x1 >= x2 or y1 >= y2:
            continue
        box = BoundingBox(x1=x1, y1=y1, x2=x2, y2=y2)
        clamped.append(dataclasses.replace(det, box=box))
    clamped.sort(key=lambda d: (-d.confidence, d.box.y1, d.box.x1))
    return clamped
