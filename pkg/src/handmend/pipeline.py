"""Five-step restoration pipeline over a persistent session directory.

Steps run in a fixed order: ``detect`` finds hand boxes and builds the
bounding-box mask, ``pose`` estimates the body skeleton and associates a
hand landmark quadruple with each restoration target, ``control`` solves
template placement and produces the control image plus union mask,
``controlnet`` performs masked control-guided inpainting, and ``ip2p``
applies the whole-image instruction edit that yields the final output.

Every step persists its artifacts and an updated manifest immediately on
completion, so a session directory can be reloaded and resumed at any
point. Artifacts are immutable: re-running a step writes files under a new
run-counter suffix instead of overwriting.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import secrets
import time
from pathlib import Path
from typing import Mapping

import numpy as np
from PIL import Image, ImageDraw

from .backends import (
    BackendError,
    BackendSet,
    HandLabel,
    InpaintRequest,
    NoPersonDetected,
    POSE_CONNECTIONS,
)
from .backends.base import BodyPoseResult, PoseLandmark
from .geometry import (
    DegenerateBaseVector,
    HandLandmarkSet,
    IndeterminateChirality,
    PlacementTransform,
    Point2,
    compute_chirality,
    scale_about_pivot,
    solve_placement,
)
from .masking import (
    BoundingBox,
    ControlImage,
    EmptyAfterClamp,
    MaskLayer,
    TemplateFullyOutside,
    expand_box,
    rasterize_box,
    rasterize_template,
    union_masks,
)
from .prompts import DEFAULT_PROMPTS, PromptBundle
from .raster import load_rgb, save_rgb
from .templates import TemplateRegistry

STEPS = ("detect", "pose", "control", "controlnet", "ip2p")

MANIFEST_NAME = "manifest.json"
INPUT_NAME = "input.png"
ARTIFACT_DIR = "artifacts"

# logical artifact names owned by each step; run suffixes are added on write
STEP_ARTIFACTS = {
    "detect": ("detections.json", "bbox_mask.png"),
    "pose": ("pose.json", "skeleton_overlay.png"),
    "control": (
        "placements.json",
        "control_image.png",
        "template_mask.png",
        "union_mask.png",
        "composite.png",
    ),
    "controlnet": ("control_inpaint.png",),
    "ip2p": ("final.png",),
}


class PipelineError(RuntimeError):
    """Base class for session and step failures."""


class PredecessorNotDone(PipelineError):
    """A step was requested while an earlier step is not done."""

    def __init__(self, step: str, missing: str) -> None:
        super().__init__(f"cannot run step {step!r}: predecessor {missing!r} is not done")
        self.step = step
        self.missing = missing


class StepExecutionError(PipelineError):
    """A step ran and failed; the failure is recorded in the manifest.

    ``recoverable`` marks failures (currently: no person detected) where the
    session remains usable and the step may simply be re-run.
    """

    def __init__(self, step: str, cause: Exception, recoverable: bool = False) -> None:
        super().__init__(f"step {step!r} failed: {cause}")
        self.step = step
        self.cause = cause
        self.recoverable = recoverable


class UnknownArtifact(PipelineError):
    """Requested artifact name does not resolve in this session."""


def sub_seed(session_seed: int, step: str, index: int) -> int:
    """Derive the seed for one backend call.

    Keyed by (session seed, step, call index) so re-running one step never
    perturbs the randomness seen by any other step.
    """

    digest = hashlib.sha256(f"{session_seed}:{step}:{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


@dataclasses.dataclass(frozen=True)
class SessionParams:
    """User-adjustable restoration parameters, fixed per run."""

    include_standard_hands: bool = False
    bbox_expand_ratio: float = 0.0
    template_name: str = "opened-palm"
    template_expand_ratio: float = 0.0
    include_undetected_hand: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        for field in ("bbox_expand_ratio", "template_expand_ratio"):
            value = getattr(self, field)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{field} must be a finite value >= 0, got {value}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if not self.template_name:
            raise ValueError("template_name must be non-empty")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "SessionParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown parameter(s) {unknown}")
        merged = {**cls().to_dict(), **dict(data)}
        merged["include_standard_hands"] = bool(merged["include_standard_hands"])
        merged["include_undetected_hand"] = bool(merged["include_undetected_hand"])
        merged["bbox_expand_ratio"] = float(merged["bbox_expand_ratio"])
        merged["template_expand_ratio"] = float(merged["template_expand_ratio"])
        if isinstance(merged["seed"], float) and merged["seed"].is_integer():
            merged["seed"] = int(merged["seed"])
        merged["template_name"] = str(merged["template_name"])
        return cls(**merged)

    def replace(self, **overrides) -> "SessionParams":
        return SessionParams.from_dict({**self.to_dict(), **overrides})


def _point_json(p: Point2) -> list[float]:
    return [p.x, p.y]


def _box_json(b: BoundingBox) -> dict:
    return {"x1": b.x1, "y1": b.y1, "x2": b.x2, "y2": b.y2}


def _box_from_json(d: Mapping) -> BoundingBox:
    return BoundingBox(x1=d["x1"], y1=d["y1"], x2=d["x2"], y2=d["y2"])


def _hand_json(hand: HandLandmarkSet) -> dict:
    return {
        "a": _point_json(hand.a),
        "b": _point_json(hand.b),
        "c": _point_json(hand.c),
        "d": _point_json(hand.d),
    }


def _hand_from_json(d: Mapping) -> HandLandmarkSet:
    return HandLandmarkSet(
        a=Point2(*d["a"]),
        b=Point2(*d["b"]),
        c=Point2(*d["c"]),
        d=Point2(*d["d"]),
        source="pose-estimate",
    )


def _transform_json(t: PlacementTransform) -> dict:
    return {
        "flipped": t.flipped,
        "flip_axis_x": t.flip_axis_x,
        "scale": t.scale,
        "translation": _point_json(t.translation),
        "rotation_angle": t.rotation_angle,
        "rotation_direction": t.rotation_direction.name,
        "pivot": _point_json(t.pivot),
    }


class PipelineSession:
    """One restoration session bound to a directory on disk."""

    def __init__(
        self,
        directory: Path,
        backends: BackendSet,
        registry: TemplateRegistry,
        manifest: dict,
        prompts: PromptBundle = DEFAULT_PROMPTS,
    ) -> None:
        self.directory = Path(directory)
        self.backends = backends
        self.registry = registry
        self.prompts = prompts
        self._manifest = manifest
        self._input_cache: np.ndarray | None = None

    # ------------------------------------------------------------------
    # construction and persistence

    @classmethod
    def create(
        cls,
        directory: Path | str,
        image: np.ndarray | Path | str,
        params: SessionParams,
        backends: BackendSet,
        registry: TemplateRegistry | None = None,
        session_id: str | None = None,
        prompts: PromptBundle = DEFAULT_PROMPTS,
    ) -> "PipelineSession":
        registry = registry if registry is not None else TemplateRegistry.built_in()
        if params.template_name not in registry:
            raise ValueError(
                f"template {params.template_name!r} not in registry "
                f"(known: {registry.names()})"
            )
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / ARTIFACT_DIR).mkdir(exist_ok=True)
        if isinstance(image, (str, Path)):
            array = load_rgb(image)
        else:
            array = np.asarray(image, dtype=np.uint8)
            if array.ndim != 3 or array.shape[2] != 3:
                raise ValueError(f"image must be (h, w, 3) uint8, got shape {array.shape}")
        save_rgb(directory / INPUT_NAME, array)
        manifest = {
            "id": session_id or secrets.token_urlsafe(16),
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "params": params.to_dict(),
            "run_counter": 0,
            "input": INPUT_NAME,
            "steps": {
                step: {"status": "pending", "reason": None, "run": None, "artifacts": {}, "warnings": []}
                for step in STEPS
            },
        }
        session = cls(directory, backends, registry, manifest, prompts)
        session._save_manifest()
        return session

    @classmethod
    def load(
        cls,
        directory: Path | str,
        backends: BackendSet,
        registry: TemplateRegistry | None = None,
        prompts: PromptBundle = DEFAULT_PROMPTS,
    ) -> "PipelineSession":
        directory = Path(directory)
        manifest_path = directory / MANIFEST_NAME
        if not manifest_path.exists():
            raise PipelineError(f"{directory} is not a session directory (no {MANIFEST_NAME})")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        registry = registry if registry is not None else TemplateRegistry.built_in()
        return cls(directory, backends, registry, manifest, prompts)

    def _save_manifest(self) -> None:
        path = self.directory / MANIFEST_NAME
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps(self._manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        tmp.replace(path)

    # ------------------------------------------------------------------
    # introspection

    @property
    def id(self) -> str:
        return self._manifest["id"]

    @property
    def params(self) -> SessionParams:
        return SessionParams.from_dict(self._manifest["params"])

    def set_params(self, params: SessionParams) -> None:
        if params.template_name not in self.registry:
            raise ValueError(f"template {params.template_name!r} not in registry")
        self._manifest["params"] = params.to_dict()
        self._save_manifest()

    def step_status(self) -> dict[str, dict]:
        return {
            step: {
                "status": entry["status"],
                "reason": entry["reason"],
                "run": entry["run"],
                "artifacts": dict(entry["artifacts"]),
                "warnings": list(entry["warnings"]),
            }
            for step, entry in self._manifest["steps"].items()
        }

    def manifest(self) -> dict:
        return json.loads(json.dumps(self._manifest))

    def is_done(self, step: str) -> bool:
        return self._manifest["steps"][step]["status"] == "done"

    def input_array(self) -> np.ndarray:
        if self._input_cache is None:
            self._input_cache = load_rgb(self.directory / INPUT_NAME)
        return self._input_cache

    def artifact_path(self, name: str) -> Path:
        """Resolve an artifact by exact stored filename or by logical name."""

        if name == INPUT_NAME:
            return self.directory / INPUT_NAME
        if name == MANIFEST_NAME:
            return self.directory / MANIFEST_NAME
        exact = self.directory / ARTIFACT_DIR / name
        if "/" in name or "\\" in name or name.startswith("."):
            raise UnknownArtifact(f"invalid artifact name {name!r}")
        if exact.exists():
            return exact
        for entry in self._manifest["steps"].values():
            stored = entry["artifacts"].get(name)
            if stored is not None:
                return self.directory / ARTIFACT_DIR / stored
        raise UnknownArtifact(f"no artifact named {name!r} in session {self.id}")

    def current_artifacts(self) -> dict[str, str]:
        """Map of logical name -> current run-suffixed filename."""

        out: dict[str, str] = {}
        for entry in self._manifest["steps"].values():
            out.update(entry["artifacts"])
        return out

    # ------------------------------------------------------------------
    # step execution

    def run_all(self) -> None:
        for step in STEPS:
            self.run_step(step)

    def run_step(self, step: str) -> dict:
        """Run one step (predecessors must be done). Returns its manifest entry."""

        self._require_step(step)
        index = STEPS.index(step)
        for previous in STEPS[:index]:
            if not self.is_done(previous):
                raise PredecessorNotDone(step, previous)
        return self._execute(step)

    def rerun_from(self, step: str) -> dict:
        """Re-run ``step`` and every downstream step that was already done.

        Upstream artifacts are untouched; downstream statuses are
        invalidated before execution so no stale artifact ever coexists
        with a fresh upstream one.
        """

        self._require_step(step)
        index = STEPS.index(step)
        for previous in STEPS[:index]:
            if not self.is_done(previous):
                raise PredecessorNotDone(step, previous)
        downstream = [s for s in STEPS[index + 1 :] if self.is_done(s)]
        for name in (step, *downstream):
            entry = self._manifest["steps"][name]
            entry["status"] = "pending"
            entry["reason"] = None
            entry["artifacts"] = {}
            entry["warnings"] = []
        self._save_manifest()
        result = self._execute(step)
        for name in downstream:
            self._execute(name)
        return result

    def _require_step(self, step: str) -> None:
        if step not in STEPS:
            raise PipelineError(f"unknown step {step!r}; steps are {list(STEPS)}")

    def _execute(self, step: str) -> dict:
        runner = getattr(self, f"_run_{step}")
        run = self._manifest["run_counter"] + 1
        self._manifest["run_counter"] = run
        entry = self._manifest["steps"][step]
        entry.update({"status": "pending", "reason": None, "run": run, "artifacts": {}, "warnings": []})
        started = time.monotonic()
        try:
            runner(run, entry)
        except (BackendError, PipelineError) as exc:
            entry["status"] = "failed"
            entry["reason"] = f"{type(exc).__name__}: {exc}"
            entry["elapsed"] = time.monotonic() - started
            self._save_manifest()
            raise StepExecutionError(step, exc, recoverable=isinstance(exc, NoPersonDetected)) from exc
        entry["status"] = "done"
        entry["elapsed"] = time.monotonic() - started
        self._save_manifest()
        return entry

    # ------------------------------------------------------------------
    # artifact helpers

    def _artifact_name(self, logical: str, run: int) -> str:
        stem, dot, ext = logical.rpartition(".")
        return f"{stem}.r{run}.{ext}"

    def _write_json(self, entry: dict, logical: str, run: int, payload: dict) -> None:
        name = self._artifact_name(logical, run)
        path = self.directory / ARTIFACT_DIR / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        entry["artifacts"][logical] = name

    def _write_png(self, entry: dict, logical: str, run: int, array: np.ndarray) -> None:
        name = self._artifact_name(logical, run)
        path = self.directory / ARTIFACT_DIR / name
        if array.ndim == 2:
            Image.fromarray(array.astype(np.uint8), mode="L").save(path, format="PNG")
        else:
            save_rgb(path, array)
        entry["artifacts"][logical] = name

    def _read_step_json(self, step: str, logical: str) -> dict:
        stored = self._manifest["steps"][step]["artifacts"].get(logical)
        if stored is None:
            raise PipelineError(f"step {step!r} has no {logical!r} artifact")
        path = self.directory / ARTIFACT_DIR / stored
        return json.loads(path.read_text(encoding="utf-8"))

    # ------------------------------------------------------------------
    # step 1: detect

    def _run_detect(self, run: int, entry: dict) -> None:
        image = self.input_array()
        h, w = image.shape[:2]
        params = self.params
        with self.backends.guard("detector"):
            detections = self.backends.detector.detect(image)
        targets = []
        for det in detections:
            is_target = det.label is HandLabel.NON_STANDARD or params.include_standard_hands
            if not is_target:
                continue
            expanded = expand_box(det.box, params.bbox_expand_ratio, w, h)
            targets.append(
                {
                    "index": len(targets),
                    "source": "detector",
                    "label": det.label.name,
                    "confidence": det.confidence,
                    "raw_box": _box_json(det.box),
                    "box": _box_json(expanded),
                }
            )
        if targets:
            bbox_mask = union_masks(
                [rasterize_box(_box_from_json(t["box"]), w, h) for t in targets]
            )
        else:
            bbox_mask = MaskLayer.blank(w, h)
            entry["warnings"].append("no restoration targets; downstream steps will no-op")
        payload = {
            "image_size": [w, h],
            "detections": [
                {
                    "box": _box_json(d.box),
                    "label": d.label.name,
                    "confidence": d.confidence,
                }
                for d in detections
            ],
            "targets": targets,
            "sub_seed": sub_seed(params.seed, "detect", 0),
        }
        self._write_json(entry, "detections.json", run, payload)
        self._write_png(entry, "bbox_mask.png", run, bbox_mask.to_array())

    # ------------------------------------------------------------------
    # step 2: pose

    def _run_pose(self, run: int, entry: dict) -> None:
        image = self.input_array()
        h, w = image.shape[:2]
        params = self.params
        detect_data = self._read_step_json("detect", "detections.json")
        targets = [dict(t) for t in detect_data["targets"]]
        detections = detect_data["detections"]

        pose: BodyPoseResult | None = None
        try:
            with self.backends.guard("pose_estimator"):
                pose = self.backends.pose_estimator.estimate(image)
        except NoPersonDetected:
            if targets:
                raise
            # nothing to restore anyway; record and continue with no skeleton
            entry["warnings"].append("no person detected, and no targets to restore")

        hands = list(pose.hands()) if pose is not None else []
        assignments = self._associate(targets, hands)

        if params.include_undetected_hand and pose is not None:
            taken = {side for side, _ in assignments.values()}
            for side, hand in hands:
                if side in taken:
                    continue
                if self._overlaps_any_detection(hand, detections):
                    continue
                box = self._box_from_hand(hand, params.bbox_expand_ratio, w, h)
                if box is None:
                    entry["warnings"].append(
                        f"{side} hand landmarks are degenerate; cannot form a target box"
                    )
                    continue
                index = len(targets)
                targets.append(
                    {
                        "index": index,
                        "source": "pose",
                        "label": HandLabel.NON_STANDARD.name,
                        "confidence": None,
                        "raw_box": None,
                        "box": _box_json(box),
                    }
                )
                assignments[index] = (side, hand)

        target_hands = []
        for target in targets:
            idx = target["index"]
            if idx in assignments:
                side, hand = assignments[idx]
                target_hands.append({"target": idx, "side": side, "hand": _hand_json(hand)})
            else:
                entry["warnings"].append(
                    f"target {idx} has no associated hand and is skipped"
                )
                target_hands.append(
                    {"target": idx, "side": None, "hand": None, "skip_reason": "no-associated-hand"}
                )

        payload = {
            "image_size": [w, h],
            "person_detected": pose is not None,
            "landmarks": [
                {
                    "name": lm.name,
                    "x": lm.point.x,
                    "y": lm.point.y,
                    "visibility": lm.visibility,
                }
                for lm in (pose.landmarks if pose is not None else ())
            ],
            "hands": {side: _hand_json(hand) for side, hand in hands},
            "targets": targets,
            "target_hands": target_hands,
            "sub_seed": sub_seed(params.seed, "pose", 0),
        }
        self._write_json(entry, "pose.json", run, payload)
        overlay = self._render_skeleton(image, pose)
        self._write_png(entry, "skeleton_overlay.png", run, overlay)

    @staticmethod
    def _overlaps_any_detection(hand: HandLandmarkSet, detections: list[dict]) -> bool:
        for det in detections:
            box = _box_from_json(det["box"])
            if box.contains_point(hand.a.x, hand.a.y):
                return True
        return False

    @staticmethod
    def _box_from_hand(
        hand: HandLandmarkSet, expand_ratio: float, image_w: int, image_h: int
    ) -> BoundingBox | None:
        xs = [hand.a.x, hand.b.x, hand.c.x, hand.d.x]
        ys = [hand.a.y, hand.b.y, hand.c.y, hand.d.y]
        if min(xs) >= max(xs) or min(ys) >= max(ys):
            return None
        tight = BoundingBox(x1=min(xs), y1=min(ys), x2=max(xs), y2=max(ys))
        try:
            return expand_box(tight, expand_ratio, image_w, image_h)
        except EmptyAfterClamp:
            return None

    @staticmethod
    def _associate(
        targets: list[dict], hands: list[tuple[str, HandLandmarkSet]]
    ) -> dict[int, tuple[str, HandLandmarkSet]]:
        """Greedy one-to-one target-to-hand assignment in target order.

        A hand whose wrist lies inside the target box wins; otherwise the
        nearest wrist to the box center is taken if within one box
        diagonal. Among inside candidates, the nearest to center wins.
        """

        assignments: dict[int, tuple[str, HandLandmarkSet]] = {}
        free = list(hands)
        for target in targets:
            if not free:
                break
            box = _box_from_json(target["box"])
            cx, cy = box.center
            scored = []
            for pos, (side, hand) in enumerate(free):
                dist = math.hypot(hand.a.x - cx, hand.a.y - cy)
                inside = box.contains_point(hand.a.x, hand.a.y)
                scored.append((not inside, dist, pos, side, hand))
            scored.sort(key=lambda item: item[:3])
            outside, dist, pos, side, hand = scored[0]
            if outside and dist > box.diagonal:
                continue
            assignments[target["index"]] = (side, hand)
            free.pop(pos)
        return assignments

    # ------------------------------------------------------------------
    # step 3: control

    def _run_control(self, run: int, entry: dict) -> None:
        image = self.input_array()
        h, w = image.shape[:2]
        params = self.params
        template = self.registry.get(params.template_name)
        pose_data = self._read_step_json("pose", "pose.json")
        bbox_mask = self._load_mask("detect", "bbox_mask.png")

        control_canvas = np.zeros((h, w, 3), dtype=np.uint8)
        template_mask = MaskLayer.blank(w, h)
        placements: list[dict] = []
        skipped: list[dict] = []

        for record in pose_data["target_hands"]:
            idx = record["target"]
            if record["hand"] is None:
                skipped.append({"target": idx, "reason": record.get("skip_reason", "no-associated-hand")})
                continue
            hand = _hand_from_json(record["hand"])
            try:
                chirality = compute_chirality(hand)
                transform = solve_placement(hand, chirality, template)
                if params.template_expand_ratio > 0:
                    transform = scale_about_pivot(transform, 1.0 + params.template_expand_ratio)
                placed_control, placed_mask = rasterize_template(template, transform, w, h)
            except (IndeterminateChirality, DegenerateBaseVector, TemplateFullyOutside) as exc:
                reason = f"{type(exc).__name__}: {exc}"
                skipped.append({"target": idx, "reason": reason})
                entry["warnings"].append(f"target {idx} skipped: {reason}")
                continue
            on = placed_mask.bits
            control_canvas[on] = placed_control.raster[on]
            template_mask = union_masks([template_mask, placed_mask])
            placements.append(
                {
                    "target": idx,
                    "side": record["side"],
                    "chirality": chirality.name,
                    "transform": _transform_json(transform),
                }
            )

        total_targets = len(pose_data["target_hands"])
        if total_targets > 0 and not placements:
            raise PipelineError(
                "all targets failed placement: " + "; ".join(s["reason"] for s in skipped)
            )

        union = union_masks([bbox_mask, template_mask])
        payload = {
            "template": template.name,
            "placements": placements,
            "skipped": skipped,
            "target_count": total_targets,
        }
        self._write_json(entry, "placements.json", run, payload)
        self._write_png(entry, "control_image.png", run, control_canvas)
        self._write_png(entry, "template_mask.png", run, template_mask.to_array())
        self._write_png(entry, "union_mask.png", run, union.to_array())
        pose_for_overlay = self._pose_from_payload(pose_data)
        composite = self._render_composite(
            image, pose_for_overlay, control_canvas, template_mask,
            [_box_from_json(t["box"]) for t in pose_data["targets"]],
        )
        self._write_png(entry, "composite.png", run, composite)

    def _load_mask(self, step: str, logical: str) -> MaskLayer:
        stored = self._manifest["steps"][step]["artifacts"].get(logical)
        if stored is None:
            raise PipelineError(f"step {step!r} has no {logical!r} artifact")
        return MaskLayer.load(self.directory / ARTIFACT_DIR / stored)

    @staticmethod
    def _pose_from_payload(pose_data: dict) -> BodyPoseResult | None:
        if not pose_data.get("person_detected"):
            return None
        landmarks = tuple(
            PoseLandmark(name=lm["name"], point=Point2(lm["x"], lm["y"]), visibility=lm["visibility"])
            for lm in pose_data["landmarks"]
        )
        return BodyPoseResult(landmarks=landmarks)

    # ------------------------------------------------------------------
    # step 4: control-guided inpaint

    def _run_controlnet(self, run: int, entry: dict) -> None:
        image = self.input_array()
        params = self.params
        union = self._load_mask("control", "union_mask.png")
        if union.is_empty():
            entry["warnings"].append("union mask empty; control inpaint is a no-op")
            self._write_png(entry, "control_inpaint.png", run, image.copy())
            return
        control_array = load_rgb(
            self.directory / ARTIFACT_DIR / self._manifest["steps"]["control"]["artifacts"]["control_image.png"]
        )
        h, w = image.shape[:2]
        request = InpaintRequest(
            image=image,
            mask=union,
            control=ControlImage(width=w, height=h, raster=control_array),
            prompt=self.prompts.render_positive(params.template_name),
            negative_prompt=self.prompts.negative,
            seed=sub_seed(params.seed, "controlnet", 0),
        )
        with self.backends.guard("control_inpainter"):
            result = self.backends.control_inpainter.inpaint(request)
        self._write_png(entry, "control_inpaint.png", run, result)

    # ------------------------------------------------------------------
    # step 5: instruction inpaint

    def _run_ip2p(self, run: int, entry: dict) -> None:
        params = self.params
        stored = self._manifest["steps"]["controlnet"]["artifacts"]["control_inpaint.png"]
        previous = load_rgb(self.directory / ARTIFACT_DIR / stored)
        union = self._load_mask("control", "union_mask.png")
        if union.is_empty():
            entry["warnings"].append("nothing was restored; instruction edit is a no-op")
            self._write_png(entry, "final.png", run, previous)
            return
        with self.backends.guard("instruction_inpainter"):
            result = self.backends.instruction_inpainter.edit(
                previous, self.prompts.instruction, sub_seed(params.seed, "ip2p", 0)
            )
        if result.shape != previous.shape:
            raise PipelineError(
                f"editor returned shape {result.shape}, expected {previous.shape}"
            )
        self._write_png(entry, "final.png", run, result)

    # ------------------------------------------------------------------
    # visualization

    @staticmethod
    def _render_skeleton(image: np.ndarray, pose: BodyPoseResult | None) -> np.ndarray:
        img = Image.fromarray(image.copy(), mode="RGB")
        if pose is None:
            return np.asarray(img, dtype=np.uint8)
        draw = ImageDraw.Draw(img)
        points = [(lm.point.x, lm.point.y, lm.visibility) for lm in pose.landmarks]
        for i, j in POSE_CONNECTIONS:
            xi, yi, vi = points[i]
            xj, yj, vj = points[j]
            if vi < 0.5 or vj < 0.5:
                continue
            draw.line([(xi, yi), (xj, yj)], fill=(0, 220, 0), width=2)
        for x, y, v in points:
            if v < 0.5:
                continue
            draw.ellipse([x - 3, y - 3, x + 3, y + 3], fill=(255, 255, 255), outline=(0, 128, 0))
        return np.asarray(img, dtype=np.uint8)

    @classmethod
    def _render_composite(
        cls,
        image: np.ndarray,
        pose: BodyPoseResult | None,
        control: np.ndarray,
        template_mask: MaskLayer,
        target_boxes: list[BoundingBox],
    ) -> np.ndarray:
        base = cls._render_skeleton(image, pose)
        on = template_mask.bits
        blended = base.copy()
        blended[on] = (base[on] // 2 + control[on] // 2).astype(np.uint8)
        img = Image.fromarray(blended, mode="RGB")
        draw = ImageDraw.Draw(img)
        for box in target_boxes:
            draw.rectangle([box.x1, box.y1, box.x2 - 1, box.y2 - 1], outline=(255, 64, 64), width=2)
        return np.asarray(img, dtype=np.uint8)


def run_full_session(
    directory: Path | str,
    image: np.ndarray | Path | str,
    params: SessionParams,
    backends: BackendSet,
    registry: TemplateRegistry | None = None,
    session_id: str | None = None,
) -> PipelineSession:
    """Create a session and execute all five steps."""

    session = PipelineSession.create(
        directory, image, params, backends, registry=registry, session_id=session_id
    )
    session.run_all()
    return session
