"""Hand template images and their landmark annotations.

A template is a rectified photograph (or synthetic rendering) of a well
formed hand together with four annotated landmarks: wrist ``a``, thumb tip
``b``, middle finger tip ``c`` and pinky tip ``d``.  Placement math treats
the wrist-to-middle-tip segment as the base vector, so templates with a
degenerate base are rejected at construction time.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .geometry import Chirality, HandLandmarkSet, Point2, compute_chirality
from .raster import load_rgb, save_rgb

TEMPLATE_SOURCE = "template-annotation"
META_SUFFIX = ".meta"


class UnknownTemplate(KeyError):
    """Requested template name is not present in the registry."""


class TemplateFormatError(ValueError):
    """A template sidecar file could not be parsed or failed validation."""


@dataclasses.dataclass(frozen=True)
class TemplateSpec:
    """An annotated hand template.

    ``raster`` is an RGB uint8 array of shape (height, width, 3).  Landmarks
    are expressed in the template's own pixel coordinate frame and must lie
    within ``[0, width] x [0, height]``.
    """

    name: str
    raster: np.ndarray
    landmarks: HandLandmarkSet

    def __post_init__(self) -> None:
        if not self.name or any(ch in self.name for ch in "/\\\0"):
            raise TemplateFormatError(f"invalid template name: {self.name!r}")
        arr = np.array(self.raster, dtype=np.uint8, copy=True)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise TemplateFormatError(f"template raster must be (h, w, 3) uint8, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "raster", arr)
        if self.landmarks.source != TEMPLATE_SOURCE:
            raise TemplateFormatError(
                f"template landmarks must carry source {TEMPLATE_SOURCE!r}, "
                f"got {self.landmarks.source!r}"
            )
        w = float(self.width)
        h = float(self.height)
        for label, point in self.landmarks.items():
            if not (0.0 <= point.x <= w and 0.0 <= point.y <= h):
                raise TemplateFormatError(
                    f"landmark {label} at ({point.x}, {point.y}) lies outside "
                    f"the {self.width}x{self.height} template raster"
                )
        base = self.landmarks.v1
        if math.hypot(base.x, base.y) <= 0.0:
            raise TemplateFormatError("template base vector a->c is degenerate")
        # force the chirality computation so degenerate spans fail here, not
        # at placement time
        self.chirality

    @property
    def width(self) -> int:
        return int(self.raster.shape[1])

    @property
    def height(self) -> int:
        return int(self.raster.shape[0])

    @property
    def chirality(self) -> Chirality:
        return compute_chirality(self.landmarks)


def _parse_point(value: str, key: str) -> Point2:
    parts = value.split()
    if len(parts) != 2:
        raise TemplateFormatError(f"landmark {key!r} needs two coordinates, got {value!r}")
    try:
        return Point2(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise TemplateFormatError(f"landmark {key!r} has non-numeric coordinates: {value!r}") from exc


def parse_template_meta(text: str) -> dict[str, str]:
    """Parse sidecar metadata: one ``key = value`` pair per line.

    Blank lines and lines starting with ``#`` are ignored.  Keys are
    lowercased; duplicate keys are an error.
    """

    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise TemplateFormatError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if not key:
            raise TemplateFormatError(f"line {lineno}: empty key")
        if key in entries:
            raise TemplateFormatError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def load_template(png_path: Path | str) -> TemplateSpec:
    """Load a template PNG plus its ``.meta`` sidecar."""

    png_path = Path(png_path)
    meta_path = png_path.with_suffix(META_SUFFIX)
    if not meta_path.exists():
        raise TemplateFormatError(f"missing sidecar {meta_path.name} for {png_path.name}")
    entries = parse_template_meta(meta_path.read_text(encoding="utf-8"))
    missing = [key for key in ("a", "b", "c", "d") if key not in entries]
    if missing:
        raise TemplateFormatError(f"{meta_path.name}: missing landmark keys {missing}")
    landmarks = HandLandmarkSet(
        a=_parse_point(entries["a"], "a"),
        b=_parse_point(entries["b"], "b"),
        c=_parse_point(entries["c"], "c"),
        d=_parse_point(entries["d"], "d"),
        source=TEMPLATE_SOURCE,
    )
    name = entries.get("name", png_path.stem)
    spec = TemplateSpec(name=name, raster=load_rgb(png_path), landmarks=landmarks)
    declared = entries.get("chirality")
    if declared is not None:
        declared = declared.upper()
        if declared not in ("CW", "CCW"):
            raise TemplateFormatError(f"{meta_path.name}: chirality must be CW or CCW, got {declared!r}")
        if spec.chirality.name != declared:
            raise TemplateFormatError(
                f"{meta_path.name}: declared chirality {declared} does not match "
                f"landmark geometry ({spec.chirality.name})"
            )
    return spec


def write_template(spec: TemplateSpec, directory: Path | str) -> Path:
    """Materialize ``spec`` as ``<name>.png`` plus sidecar; returns the PNG path."""

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    png_path = directory / f"{spec.name}.png"
    save_rgb(png_path, spec.raster)
    lm = spec.landmarks
    lines = [f"name = {spec.name}", f"chirality = {spec.chirality.name}"]
    for label, point in (("a", lm.a), ("b", lm.b), ("c", lm.c), ("d", lm.d)):
        lines.append(f"{label} = {point.x:.6f} {point.y:.6f}")
    png_path.with_suffix(META_SUFFIX).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return png_path


class TemplateRegistry:
    """Name-keyed collection of templates."""

    def __init__(self, templates: dict[str, TemplateSpec] | None = None) -> None:
        self._templates: dict[str, TemplateSpec] = dict(templates or {})

    @classmethod
    def built_in(cls) -> "TemplateRegistry":
        return cls({spec.name: spec for spec in (_opened_palm(), _fist_back())})

    @classmethod
    def load_dir(cls, directory: Path | str) -> "TemplateRegistry":
        """Load every ``*.png`` with a sidecar from ``directory``."""

        directory = Path(directory)
        registry = cls()
        for png_path in sorted(directory.glob("*.png")):
            registry.add(load_template(png_path))
        return registry

    def add(self, spec: TemplateSpec) -> None:
        if spec.name in self._templates:
            raise TemplateFormatError(f"duplicate template name {spec.name!r}")
        self._templates[spec.name] = spec

    def get(self, name: str) -> TemplateSpec:
        try:
            return self._templates[name]
        except KeyError:
            known = ", ".join(sorted(self._templates)) or "<none>"
            raise UnknownTemplate(f"no template named {name!r} (known: {known})") from None

    def names(self) -> list[str]:
        return sorted(self._templates)

    def __len__(self) -> int:
        return len(self._templates)

    def __contains__(self, name: object) -> bool:
        return name in self._templates


_SKIN = (224, 172, 138)
_SKIN_DARK = (188, 136, 104)


def _finger(draw: ImageDraw.ImageDraw, base: tuple[float, float], tip: tuple[float, float], radius: float) -> None:
    draw.line([base, tip], fill=_SKIN, width=int(round(radius * 2)))
    for cx, cy in (base, tip):
        draw.ellipse([cx - radius, cy - radius, cx + radius, cy + radius], fill=_SKIN)


def _opened_palm() -> TemplateSpec:
    """Synthetic open right palm, fingers up, thumb on the left."""

    img = Image.new("RGB", (200, 260), (0, 0, 0))
    draw = ImageDraw.Draw(img)
    draw.polygon([(58, 245), (142, 245), (152, 150), (48, 150)], fill=_SKIN)
    draw.ellipse([52, 130, 148, 230], fill=_SKIN)
    _finger(draw, (70, 160), (62, 92), 9)
    _finger(draw, (92, 155), (90, 74), 10)
    _finger(draw, (112, 155), (116, 82), 10)
    _finger(draw, (130, 160), (138, 100), 9)
    _finger(draw, (58, 190), (30, 150), 11)
    draw.line([(70, 175), (120, 170)], fill=_SKIN_DARK, width=3)
    draw.line([(68, 195), (124, 188)], fill=_SKIN_DARK, width=3)
    landmarks = HandLandmarkSet(
        a=Point2(100.0, 245.0),
        b=Point2(48.0, 150.0),
        c=Point2(100.0, 70.0),
        d=Point2(152.0, 150.0),
        source=TEMPLATE_SOURCE,
    )
    return TemplateSpec(name="opened-palm", raster=np.asarray(img, dtype=np.uint8), landmarks=landmarks)


def _fist_back() -> TemplateSpec:
    """Synthetic closed fist seen from the back, knuckles up."""

    img = Image.new("RGB", (200, 200), (0, 0, 0))
    draw = ImageDraw.Draw(img)
    draw.ellipse([48, 60, 152, 180], fill=_SKIN)
    for i, kx in enumerate((70, 92, 114, 134)):
        ky = 62 + 3 * abs(i - 1)
        draw.ellipse([kx - 12, ky - 14, kx + 12, ky + 18], fill=_SKIN)
        draw.ellipse([kx - 6, ky - 8, kx + 6, ky + 2], fill=_SKIN_DARK)
    draw.ellipse([130, 95, 170, 135], fill=_SKIN)
    draw.line([(60, 150), (140, 155)], fill=_SKIN_DARK, width=3)
    landmarks = HandLandmarkSet(
        a=Point2(100.0, 185.0),
        b=Point2(160.0, 100.0),
        c=Point2(100.0, 40.0),
        d=Point2(40.0, 110.0),
        source=TEMPLATE_SOURCE,
    )
    return TemplateSpec(name="fist-back", raster=np.asarray(img, dtype=np.uint8), landmarks=landmarks)
