"""Adapter contracts and a socket transport for real inference engines.

Engines run out-of-process and speak the frame protocol from :mod:`.wire`.
Adapters are responsible for unit conversion (engines report normalized
coordinates, the core works in pixels), for clamping raw detector output,
and for re-imposing the mask discipline on inpainted results: diffusion
engines repaint unmasked pixels slightly, so the engine output is
composited over the original through the mask before it leaves the
adapter.
"""

from __future__ import annotations

import socket
import uuid
from typing import Mapping, Sequence

import numpy as np

from ..geometry import Point2
from ..masking import BoundingBox, MaskLayer
from ..raster import rgb_from_png_bytes, rgb_png_bytes
from .base import (
    BackendUnavailable,
    BodyPoseResult,
    ControlInpainter,
    HandDetection,
    HandLabel,
    InferenceFailure,
    InpaintRequest,
    InstructionInpainter,
    PoseLandmark,
    finalize_detections,
    hand_set_from_pose,
)
from .wire import WireError, read_message, write_message


def normalized_to_pixel(x: float, y: float, width: int, height: int) -> Point2:
    """Convert engine coordinates in [0, 1] to pixel coordinates."""

    return Point2(x * width, y * height)


def pose_from_normalized(
    landmarks: Sequence[Mapping],
    width: int,
    height: int,
    left_hand: bool = True,
    right_hand: bool = True,
) -> BodyPoseResult:
    """Build a pose result from an engine payload of normalized landmarks.

    Each payload entry carries ``name``, ``x``, ``y`` in [0, 1] and
    ``visibility``. Hand landmark sets are derived from the skeleton for
    the sides the engine claims to have predicted.
    """

    converted = tuple(
        PoseLandmark(
            name=entry["name"],
            point=normalized_to_pixel(float(entry["x"]), float(entry["y"]), width, height),
            visibility=float(entry.get("visibility", 1.0)),
        )
        for entry in landmarks
    )
    skeleton = BodyPoseResult(landmarks=converted)
    return BodyPoseResult(
        landmarks=converted,
        left_hand=hand_set_from_pose(skeleton, "left") if left_hand else None,
        right_hand=hand_set_from_pose(skeleton, "right") if right_hand else None,
    )


def detections_from_raw(
    raw: Sequence[Mapping], image_w: int, image_h: int
) -> list[HandDetection]:
    """Convert raw engine boxes (pixel coordinates, possibly out of range).

    Boxes reaching past the image edge are clamped, never rejected.
    ``label`` accepts the numeric class (0 standard, 1 non-standard) or the
    lowercase class name.
    """

    detections = []
    for entry in raw:
        label = entry["label"]
        if isinstance(label, str):
            label = HandLabel[label.upper().replace("-", "_")]
        detections.append(
            HandDetection(
                box=BoundingBox(
                    x1=float(entry["x1"]),
                    y1=float(entry["y1"]),
                    x2=float(entry["x2"]),
                    y2=float(entry["y2"]),
                ),
                label=HandLabel(label),
                confidence=float(entry["confidence"]),
            )
        )
    return finalize_detections(detections, image_w, image_h)


def composite_through_mask(
    engine_output: np.ndarray, original: np.ndarray, mask: MaskLayer
) -> np.ndarray:
    """Keep engine pixels where the mask is on, original everywhere else."""

    out = np.asarray(engine_output, dtype=np.uint8)
    orig = np.asarray(original, dtype=np.uint8)
    if out.shape != orig.shape:
        raise InferenceFailure(
            f"engine returned shape {out.shape}, expected {orig.shape}"
        )
    return np.where(mask.bits[:, :, None], out, orig)


class _SocketTransport:
    """One-request-per-connection client for the frame protocol."""

    def __init__(self, host: str, port: int, timeout: float, options: Mapping | None) -> None:
        self._host = host
        self._port = int(port)
        self._timeout = float(timeout)
        # engine-specific tuning travels opaquely in every request header
        self._options = dict(options or {})

    def roundtrip(self, header: dict, blobs: Sequence[bytes]) -> tuple[dict, list[bytes]]:
        request_id = str(uuid.uuid4())
        header = dict(header, id=request_id, options=self._options)
        try:
            with socket.create_connection((self._host, self._port), timeout=self._timeout) as sock:
                with sock.makefile("rwb") as stream:
                    write_message(stream, header, blobs)
                    response, response_blobs = read_message(stream)
        except (OSError, socket.timeout) as exc:
            raise BackendUnavailable(
                f"engine at {self._host}:{self._port} unreachable: {exc}"
            ) from exc
        except WireError as exc:
            raise InferenceFailure(f"engine protocol error: {exc}") from exc
        if response.get("id") != request_id:
            raise InferenceFailure(
                f"engine answered request {response.get('id')!r}, expected {request_id!r}"
            )
        if response.get("status") != "ok":
            raise InferenceFailure(str(response.get("message", "engine reported an error")))
        return response, response_blobs


class SocketControlInpainter(ControlInpainter):
    """Control-guided inpainting over a socket engine."""

    reentrant = True

    def __init__(self, host: str, port: int, timeout: float = 30.0, options: Mapping | None = None) -> None:
        self._transport = _SocketTransport(host, port, timeout, options)

    def inpaint(self, request: InpaintRequest) -> np.ndarray:
        blobs = [rgb_png_bytes(request.image), request.mask.to_bytes_png()]
        if request.control is not None:
            blobs.append(rgb_png_bytes(request.control.raster))
        header = {
            "type": "control_inpaint",
            "prompt": request.prompt,
            "negative_prompt": request.negative_prompt,
            "seed": request.seed,
            "has_control": request.control is not None,
        }
        _, response_blobs = self._transport.roundtrip(header, blobs)
        if len(response_blobs) != 1:
            raise InferenceFailure(f"expected 1 result blob, got {len(response_blobs)}")
        result = rgb_from_png_bytes(response_blobs[0])
        return composite_through_mask(result, request.image, request.mask)


class SocketInstructionInpainter(InstructionInpainter):
    """Instruction-driven editing over a socket engine."""

    reentrant = True

    def __init__(self, host: str, port: int, timeout: float = 30.0, options: Mapping | None = None) -> None:
        self._transport = _SocketTransport(host, port, timeout, options)

    def edit(self, image: np.ndarray, instruction: str, seed: int) -> np.ndarray:
        instruction = instruction.strip()
        if not instruction:
            raise ValueError("instruction must be non-empty")
        header = {"type": "instruction_edit", "instruction": instruction, "seed": seed}
        _, response_blobs = self._transport.roundtrip(header, [rgb_png_bytes(image)])
        if len(response_blobs) != 1:
            raise InferenceFailure(f"expected 1 result blob, got {len(response_blobs)}")
        result = rgb_from_png_bytes(response_blobs[0])
        expected = np.asarray(image).shape
        if result.shape != expected:
            raise InferenceFailure(f"engine returned shape {result.shape}, expected {expected}")
        return result
