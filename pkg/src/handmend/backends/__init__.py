"""Inference backend interfaces, deterministic mocks and adapters."""

from .base import (
    POSE_CONNECTIONS,
    POSE_LANDMARK_NAMES,
    BackendError,
    BackendUnavailable,
    BodyPoseResult,
    ControlInpainter,
    Detector,
    HandDetection,
    HandLabel,
    InferenceFailure,
    InpaintRequest,
    InstructionInpainter,
    NoPersonDetected,
    PoseEstimator,
    PoseLandmark,
    finalize_detections,
    hand_set_from_pose,
)
from .config import BackendSet, ConfigError, build_backends
from .mocks import (
    FixtureDetector,
    FixturePoseEstimator,
    HashPatternInpainter,
    MockInstructionEditor,
    canonical_detections,
    canonical_pose,
)

__all__ = [
    "POSE_CONNECTIONS",
    "POSE_LANDMARK_NAMES",
    "BackendError",
    "BackendUnavailable",
    "BackendSet",
    "BodyPoseResult",
    "ConfigError",
    "ControlInpainter",
    "Detector",
    "FixtureDetector",
    "FixturePoseEstimator",
    "HandDetection",
    "HandLabel",
    "HashPatternInpainter",
    "InferenceFailure",
    "InpaintRequest",
    "InstructionInpainter",
    "MockInstructionEditor",
    "NoPersonDetected",
    "PoseEstimator",
    "PoseLandmark",
    "build_backends",
    "canonical_detections",
    "canonical_pose",
    "finalize_detections",
    "hand_set_from_pose",
]
