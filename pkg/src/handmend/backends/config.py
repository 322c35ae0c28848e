"""Backend selection by name.

A backend configuration is a mapping with up to four sections (detector,
pose, control, instruction), each naming an implementation plus its option
bag. Unknown names or option keys fail at startup; there is no silent
fallback. An empty configuration yields the all-mock set, which is fully
deterministic and needs no external engines.
"""

from __future__ import annotations

import contextlib
import dataclasses
import threading
from typing import Callable, Mapping

from .adapters import SocketControlInpainter, SocketInstructionInpainter, detections_from_raw
from .base import (
    ControlInpainter,
    Detector,
    InstructionInpainter,
    PoseEstimator,
)
from .mocks import (
    FixtureDetector,
    FixturePoseEstimator,
    HashPatternInpainter,
    MockInstructionEditor,
)

SECTIONS = ("detector", "pose", "control", "instruction")


class ConfigError(ValueError):
    """Invalid backend configuration (unknown name, bad option bag)."""


@dataclasses.dataclass
class BackendSet:
    """The four backend instances plus their serialization guards.

    Non-reentrant instances get one lock each so that a single in-flight
    call is enforced process-wide; reentrant instances get a no-op guard.
    Instances must not be shared across BackendSets, or the single-call
    contract would be enforced per set instead of per instance.
    """

    detector: Detector
    pose_estimator: PoseEstimator
    control_inpainter: ControlInpainter
    instruction_inpainter: InstructionInpainter

    def __post_init__(self) -> None:
        self._guards = {}
        for name in ("detector", "pose_estimator", "control_inpainter", "instruction_inpainter"):
            instance = getattr(self, name)
            if getattr(instance, "reentrant", False):
                self._guards[name] = contextlib.nullcontext()
            else:
                self._guards[name] = threading.Lock()

    def guard(self, name: str):
        """Context manager serializing calls to the named backend."""

        return self._guards[name]


def _check_options(section: str, name: str, options: Mapping, allowed: tuple[str, ...]) -> None:
    unknown = sorted(set(options) - set(allowed))
    if unknown:
        raise ConfigError(
            f"{section} backend {name!r} does not accept options {unknown}; allowed: {sorted(allowed)}"
        )


def _build_mock_detector(options: Mapping) -> Detector:
    _check_options("detector", "mock", options, ("empty", "boxes"))
    boxes = options.get("boxes")
    fixture = None
    if boxes is not None:
        fixture = lambda w, h: detections_from_raw(boxes, w, h)
    return FixtureDetector(detections=fixture, empty=bool(options.get("empty", False)))


def _build_mock_pose(options: Mapping) -> PoseEstimator:
    _check_options("pose", "mock", options, ("no_person",))
    return FixturePoseEstimator(no_person=bool(options.get("no_person", False)))


def _build_mock_control(options: Mapping) -> ControlInpainter:
    _check_options("control", "mock", options, ("blend_control",))
    return HashPatternInpainter(blend_control=bool(options.get("blend_control", True)))


def _build_mock_instruction(options: Mapping) -> InstructionInpainter:
    _check_options("instruction", "mock", options, ("mode",))
    try:
        return MockInstructionEditor(mode=options.get("mode", "identity"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _socket_args(section: str, options: Mapping) -> dict:
    _check_options(section, "socket", options, ("host", "port", "timeout", "options"))
    missing = [key for key in ("host", "port") if key not in options]
    if missing:
        raise ConfigError(f"{section} backend 'socket' requires options {missing}")
    extra = options.get("options", {})
    if not isinstance(extra, Mapping):
        raise ConfigError(f"{section} backend 'socket': 'options' must be a mapping")
    return {
        "host": str(options["host"]),
        "port": int(options["port"]),
        "timeout": float(options.get("timeout", 30.0)),
        "options": dict(extra),
    }


def _build_socket_control(options: Mapping) -> ControlInpainter:
    return SocketControlInpainter(**_socket_args("control", options))


def _build_socket_instruction(options: Mapping) -> InstructionInpainter:
    return SocketInstructionInpainter(**_socket_args("instruction", options))


_FACTORIES: dict[str, dict[str, Callable[[Mapping], object]]] = {
    "detector": {"mock": _build_mock_detector},
    "pose": {"mock": _build_mock_pose},
    "control": {"mock": _build_mock_control, "socket": _build_socket_control},
    "instruction": {"mock": _build_mock_instruction, "socket": _build_socket_instruction},
}


def _build_section(section: str, spec: Mapping | None):
    spec = spec or {}
    if not isinstance(spec, Mapping):
        raise ConfigError(f"section {section!r} must be a mapping, got {type(spec).__name__}")
    name = spec.get("name", "mock")
    factories = _FACTORIES[section]
    if name not in factories:
        raise ConfigError(
            f"unknown {section} backend {name!r}; available: {sorted(factories)}"
        )
    options = spec.get("options", {})
    if not isinstance(options, Mapping):
        raise ConfigError(f"section {section!r}: 'options' must be a mapping")
    stray = sorted(set(spec) - {"name", "options"})
    if stray:
        raise ConfigError(f"section {section!r} has unexpected keys {stray}")
    return factories[name](options)


def build_backends(config: Mapping | None = None) -> BackendSet:
    """Construct a BackendSet from a configuration mapping."""

    config = config or {}
    unknown = sorted(set(config) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown configuration sections {unknown}; expected {list(SECTIONS)}")
    return BackendSet(
        detector=_build_section("detector", config.get("detector")),
        pose_estimator=_build_section("pose", config.get("pose")),
        control_inpainter=_build_section("control", config.get("control")),
        instruction_inpainter=_build_section("instruction", config.get("instruction")),
    )
