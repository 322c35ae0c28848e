"""Deterministic mock backends.

The mocks are pure functions of their inputs (plus an explicit seed where
the interface carries one), so pipeline runs over them are byte-for-byte
reproducible. The canonical fixtures describe a frontal standing figure
with both hands raised near chest height: the subject's right hand (image
left) is detected as non-standard, the left hand (image right) as standard.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..masking import BoundingBox
from .base import (
    POSE_LANDMARK_NAMES,
    BodyPoseResult,
    ControlInpainter,
    Detector,
    HandDetection,
    HandLabel,
    InpaintRequest,
    InstructionInpainter,
    NoPersonDetected,
    PoseEstimator,
    PoseLandmark,
    finalize_detections,
    hand_set_from_pose,
)
from ..geometry import Point2

# normalized (x, y, visibility) for the canonical standing figure; the
# subject's left side appears on the image's right (x > 0.5)
_CANONICAL_POSE_NORM: dict[str, tuple[float, float, float]] = {
    "nose": (0.500, 0.120, 0.99),
    "left_eye_inner": (0.520, 0.100, 0.98),
    "left_eye": (0.535, 0.100, 0.98),
    "left_eye_outer": (0.550, 0.100, 0.98),
    "right_eye_inner": (0.480, 0.100, 0.98),
    "right_eye": (0.465, 0.100, 0.98),
    "right_eye_outer": (0.450, 0.100, 0.98),
    "left_ear": (0.570, 0.115, 0.97),
    "right_ear": (0.430, 0.115, 0.97),
    "mouth_left": (0.525, 0.155, 0.97),
    "mouth_right": (0.475, 0.155, 0.97),
    "left_shoulder": (0.615, 0.260, 0.99),
    "right_shoulder": (0.385, 0.260, 0.99),
    "left_elbow": (0.660, 0.420, 0.96),
    "right_elbow": (0.340, 0.420, 0.96),
    "left_wrist": (0.700, 0.580, 0.93),
    "right_wrist": (0.300, 0.580, 0.93),
    "left_pinky": (0.662, 0.528, 0.88),
    "right_pinky": (0.338, 0.528, 0.88),
    "left_index": (0.705, 0.495, 0.88),
    "right_index": (0.295, 0.495, 0.88),
    "left_thumb": (0.730, 0.520, 0.88),
    "right_thumb": (0.270, 0.520, 0.88),
    "left_hip": (0.578, 0.545, 0.99),
    "right_hip": (0.422, 0.545, 0.99),
    "left_knee": (0.585, 0.730, 0.95),
    "right_knee": (0.415, 0.730, 0.95),
    "left_ankle": (0.590, 0.890, 0.92),
    "right_ankle": (0.410, 0.890, 0.92),
    "left_heel": (0.585, 0.915, 0.90),
    "right_heel": (0.415, 0.915, 0.90),
    "left_foot_index": (0.630, 0.940, 0.90),
    "right_foot_index": (0.370, 0.940, 0.90),
}

# canonical detector boxes, normalized; the right-hand box is the
# non-standard one
_CANONICAL_BOXES_NORM = (
    (0.22, 0.42, 0.38, 0.64, HandLabel.NON_STANDARD, 0.91),
    (0.62, 0.42, 0.78, 0.64, HandLabel.STANDARD, 0.84),
)


def canonical_pose(width: int, height: int) -> BodyPoseResult:
    """The canonical skeleton scaled to the given image size.

    The right hand is CCW and the left hand CW under the chirality rule,
    which the fixture geometry guarantees for every aspect ratio because a
    positive diagonal scaling never changes the sign of a cross product.
    """

    landmarks = tuple(
        PoseLandmark(
            name=name,
            point=Point2(nx * width, ny * height),
            visibility=vis,
        )
        for name, (nx, ny, vis) in (
            (n, _CANONICAL_POSE_NORM[n]) for n in POSE_LANDMARK_NAMES
        )
    )
    partial = BodyPoseResult(landmarks=landmarks)
    return BodyPoseResult(
        landmarks=landmarks,
        left_hand=hand_set_from_pose(partial, "left"),
        right_hand=hand_set_from_pose(partial, "right"),
    )


def canonical_detections(width: int, height: int) -> list[HandDetection]:
    dets = [
        HandDetection(
            box=BoundingBox(x1=x1 * width, y1=y1 * height, x2=x2 * width, y2=y2 * height),
            label=label,
            confidence=conf,
        )
        for x1, y1, x2, y2, label, conf in _CANONICAL_BOXES_NORM
    ]
    return finalize_detections(dets, width, height)


class FixtureDetector(Detector):
    """Detector that replays a fixture.

    ``detections`` may be a list (returned for every image, clamped and
    sorted), a callable ``(width, height) -> list``, or None for the
    canonical scene. ``empty=True`` forces zero detections.
    """

    reentrant = True

    def __init__(self, detections=None, empty: bool = False) -> None:
        self._detections = detections
        self._empty = bool(empty)

    def detect(self, image: np.ndarray) -> list[HandDetection]:
        h, w = np.asarray(image).shape[:2]
        if self._empty:
            return []
        if self._detections is None:
            return canonical_detections(w, h)
        raw = self._detections(w, h) if callable(self._detections) else list(self._detections)
        return finalize_detections(raw, w, h)


class FixturePoseEstimator(PoseEstimator):
    """Pose estimator that replays a fixture.

    ``pose`` may be a BodyPoseResult (returned verbatim), a callable
    ``(width, height) -> BodyPoseResult``, or None for the canonical
    skeleton. ``no_person=True`` raises NoPersonDetected instead.
    """

    reentrant = True

    def __init__(self, pose=None, no_person: bool = False) -> None:
        self._pose = pose
        self._no_person = bool(no_person)

    def estimate(self, image: np.ndarray) -> BodyPoseResult:
        if self._no_person:
            raise NoPersonDetected("fixture estimator configured with no person")
        h, w = np.asarray(image).shape[:2]
        if self._pose is None:
            return canonical_pose(w, h)
        if callable(self._pose):
            return self._pose(w, h)
        return self._pose


def _pattern(shape: tuple[int, int, int], *chunks: bytes) -> np.ndarray:
    """Deterministic pseudo-random uint8 field keyed by the given chunks."""

    digest = hashlib.sha256(b"\x00".join(chunks)).digest()
    key = int.from_bytes(digest[:8], "big")
    gen = np.random.Generator(np.random.PCG64(key))
    return gen.integers(0, 256, size=shape, dtype=np.uint8)


class HashPatternInpainter(ControlInpainter):
    """Fills the masked region with a hash-keyed pattern.

    Output is a pure function of (image, mask, control, prompt, negative
    prompt, seed); unmasked pixels are byte-identical to the input. When a
    control image is present the fill is blended toward it so placed
    templates remain visible in mock runs.
    """

    reentrant = True

    def __init__(self, blend_control: bool = True) -> None:
        self._blend_control = bool(blend_control)

    def inpaint(self, request: InpaintRequest) -> np.ndarray:
        image = request.image
        chunks = [
            str(request.seed).encode("utf-8"),
            request.prompt.encode("utf-8"),
            (request.negative_prompt or "").encode("utf-8"),
            image.tobytes(),
            request.mask.bits.tobytes(),
        ]
        if request.control is not None:
            chunks.append(request.control.raster.tobytes())
        fill = _pattern(image.shape, *chunks)
        if self._blend_control and request.control is not None:
            fill = (fill // 2 + request.control.raster // 2).astype(np.uint8)
        return np.where(request.mask.bits[:, :, None], fill, image)


class MockInstructionEditor(InstructionInpainter):
    """Identity or deterministic-perturbation instruction editor.

    ``mode="identity"`` returns the input unchanged. ``mode="perturb"``
    adds a small hash-keyed offset to every pixel, deterministic in
    (image, instruction, seed).
    """

    reentrant = True

    def __init__(self, mode: str = "identity") -> None:
        if mode not in ("identity", "perturb"):
            raise ValueError(f"mode must be 'identity' or 'perturb', got {mode!r}")
        self._mode = mode

    def edit(self, image: np.ndarray, instruction: str, seed: int) -> np.ndarray:
        if not instruction:
            raise ValueError("instruction must be non-empty")
        image = np.asarray(image, dtype=np.uint8)
        if self._mode == "identity":
            return image.copy()
        noise = _pattern(
            image.shape,
            str(seed).encode("utf-8"),
            instruction.encode("utf-8"),
            image.tobytes(),
        )
        # offsets in [-8, 7] keep the perturbed image visually close
        offset = (noise.astype(np.int16) % 16) - 8
        return np.clip(image.astype(np.int16) + offset, 0, 255).astype(np.uint8)
