"""Paired original/redrawn dataset protocol.

Annotation interchange format: one UTF-8 ``.txt`` per image, one hand per
line as ``label cx cy w h`` with normalized center-format coordinates
(label 0 = standard hand, 1 = non-standard). A pair joins an original
image (all hands standard) with its redrawn counterpart that contains at
least one non-standard hand; pairing is by id convention, redrawn id =
original id + suffix.

Reference corpus scale for the protocol this tooling mirrors: 10,626
annotated images cumulatively containing 11,061 non-standard instances,
split 90/10 into 9,623 training and 1,003 test images. Those source
figures label the split counts as pair counts even though they sum to the
image count; the discrepancy is preserved here as documentation only, and
the split arithmetic below trusts its own computation.
"""

from __future__ import annotations

import dataclasses
import random
import re
from pathlib import Path
from typing import Iterable, Mapping, Sequence

REFERENCE_IMAGE_COUNT = 10626
REFERENCE_INSTANCE_COUNT = 11061
REFERENCE_TRAIN_COUNT = 9623
REFERENCE_TEST_COUNT = 1003

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")
DEFAULT_REDRAWN_SUFFIX = "_redrawn"

_TOKEN = re.compile(r"\S+")


class ParseError(ValueError):
    """Malformed annotation text; carries the 1-based line and column."""

    def __init__(self, line: int, column: int, reason: str) -> None:
        super().__init__(f"line {line}, column {column}: {reason}")
        self.line = line
        self.column = column
        self.reason = reason


class EmptyInput(ValueError):
    """An operation requiring at least one element got none."""


@dataclasses.dataclass(frozen=True)
class HandAnnotation:
    """One annotated hand in normalized center format."""

    label: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        for name in ("cx", "cy", "w", "h"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"w and h must be > 0, got w={self.w}, h={self.h}")


@dataclasses.dataclass(frozen=True)
class AnnotationRecord:
    """All hand annotations for one image."""

    image_id: str
    image_w: int
    image_h: int
    hands: tuple[HandAnnotation, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "hands", tuple(self.hands))
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError(
                f"image dimensions must be positive, got {self.image_w}x{self.image_h}"
            )

    @property
    def has_non_standard(self) -> bool:
        return any(hand.label == 1 for hand in self.hands)

    @property
    def all_standard(self) -> bool:
        return all(hand.label == 0 for hand in self.hands)


@dataclasses.dataclass(frozen=True)
class ImagePair:
    """Original image id joined with its redrawn counterpart's id."""

    original_id: str
    redrawn_id: str


def _parse_line(lineno: int, line: str) -> HandAnnotation:
    tokens = list(_TOKEN.finditer(line))
    if len(tokens) != 5:
        column = tokens[5].start() + 1 if len(tokens) > 5 else len(line) + 1
        raise ParseError(lineno, column, f"expected 5 fields 'label cx cy w h', got {len(tokens)}")
    raw_label = tokens[0].group()
    if raw_label not in ("0", "1"):
        raise ParseError(lineno, tokens[0].start() + 1, f"label must be 0 or 1, got {raw_label!r}")
    values = []
    for token, name in zip(tokens[1:], ("cx", "cy", "w", "h")):
        try:
            value = float(token.group())
        except ValueError:
            raise ParseError(
                lineno, token.start() + 1, f"{name} is not a number: {token.group()!r}"
            ) from None
        values.append((token, name, value))
    for token, name, value in values:
        if not (0.0 <= value <= 1.0):
            raise ParseError(lineno, token.start() + 1, f"{name} must be in [0, 1], got {value}")
    for token, name, value in values[2:]:
        if value <= 0:
            raise ParseError(lineno, token.start() + 1, f"{name} must be > 0, got {value}")
    return HandAnnotation(
        label=int(raw_label),
        cx=values[0][2],
        cy=values[1][2],
        w=values[2][2],
        h=values[3][2],
    )


def parse_annotations(text: str) -> list[HandAnnotation]:
    """Parse one image's annotation text, one hand per non-blank line."""

    hands = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        hands.append(_parse_line(lineno, line))
    return hands


def serialize_annotations(hands: Iterable[HandAnnotation]) -> str:
    """Canonical serialization: 6-decimal coordinates, one hand per line."""

    lines = [
        f"{hand.label} {hand.cx:.6f} {hand.cy:.6f} {hand.w:.6f} {hand.h:.6f}"
        for hand in hands
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def _image_size(path: Path) -> tuple[int, int]:
    from PIL import Image

    with Image.open(path) as img:
        return img.size


def load_annotation_dir(directory: Path | str) -> tuple[dict[str, AnnotationRecord], list[str]]:
    """Load ``<id>.txt`` + image pairs from a directory.

    Returns records keyed by id plus non-fatal warnings for annotation
    files without a matching image (skipped) and images without
    annotations (skipped).
    """

    directory = Path(directory)
    warnings: list[str] = []
    records: dict[str, AnnotationRecord] = {}
    txt_files = {p.stem: p for p in sorted(directory.glob("*.txt"))}
    image_files: dict[str, Path] = {}
    for ext in IMAGE_EXTENSIONS:
        for p in sorted(directory.glob(f"*{ext}")):
            image_files.setdefault(p.stem, p)
    for stem in sorted(set(image_files) - set(txt_files)):
        warnings.append(f"image {image_files[stem].name} has no annotation file")
    for stem, txt_path in txt_files.items():
        image_path = image_files.get(stem)
        if image_path is None:
            warnings.append(f"annotation {txt_path.name} has no matching image")
            continue
        try:
            hands = parse_annotations(txt_path.read_text(encoding="utf-8"))
        except ParseError as exc:
            raise ParseError(exc.line, exc.column, f"{txt_path.name}: {exc.reason}") from exc
        w, h = _image_size(image_path)
        records[stem] = AnnotationRecord(image_id=stem, image_w=w, image_h=h, hands=tuple(hands))
    return records, warnings


def build_pairs(
    original_dir: Path | str,
    redrawn_dir: Path | str,
    annotations: Mapping[str, AnnotationRecord],
    suffix: str = DEFAULT_REDRAWN_SUFFIX,
) -> tuple[list[ImagePair], list[str]]:
    """Join originals with redrawn counterparts by the id suffix convention.

    Emits only pairs whose redrawn record has at least one non-standard
    hand and whose original record has none. Orphans (missing counterpart
    or missing annotation record) produce warnings, never errors. Output
    order is sorted by original id, independent of listing order.
    """

    original_ids = _list_image_ids(original_dir)
    redrawn_ids = _list_image_ids(redrawn_dir)
    warnings: list[str] = []
    pairs: list[ImagePair] = []
    claimed_redrawn: set[str] = set()
    for original_id in sorted(original_ids):
        redrawn_id = original_id + suffix
        if redrawn_id not in redrawn_ids:
            warnings.append(f"original {original_id!r} has no redrawn image {redrawn_id!r}")
            continue
        claimed_redrawn.add(redrawn_id)
        original_record = annotations.get(original_id)
        redrawn_record = annotations.get(redrawn_id)
        if original_record is None:
            warnings.append(f"original {original_id!r} has no annotation record")
            continue
        if redrawn_record is None:
            warnings.append(f"redrawn {redrawn_id!r} has no annotation record")
            continue
        if not original_record.all_standard:
            warnings.append(
                f"original {original_id!r} contains a non-standard hand; pair excluded"
            )
            continue
        if not redrawn_record.has_non_standard:
            continue
        pairs.append(ImagePair(original_id=original_id, redrawn_id=redrawn_id))
    for redrawn_id in sorted(redrawn_ids - claimed_redrawn):
        warnings.append(f"redrawn {redrawn_id!r} has no original image")
    return pairs, warnings


def _list_image_ids(directory: Path | str) -> set[str]:
    directory = Path(directory)
    ids = set()
    for ext in IMAGE_EXTENSIONS:
        ids.update(p.stem for p in directory.glob(f"*{ext}"))
    return ids


def split_pairs(
    pairs: Sequence[ImagePair], train_fraction: float, seed: int
) -> tuple[list[ImagePair], list[ImagePair]]:
    """Deterministic shuffled split; |train| = round(train_fraction * n)."""

    if not pairs:
        raise EmptyInput("split_pairs requires at least one pair")
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    shuffled = list(pairs)
    random.Random(seed).shuffle(shuffled)
    n_train = round(train_fraction * len(shuffled))
    return shuffled[:n_train], shuffled[n_train:]


def write_pair_index(pairs: Iterable[ImagePair], path: Path | str) -> None:
    lines = [f"{p.original_id}\t{p.redrawn_id}" for p in pairs]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_pair_index(path: Path | str) -> list[ImagePair]:
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(lineno, 1, f"expected 'original<TAB>redrawn', got {line!r}")
        pairs.append(ImagePair(original_id=parts[0], redrawn_id=parts[1]))
    return pairs


def write_id_list(pairs: Iterable[ImagePair], path: Path | str) -> None:
    """Write one original id per line (the split output format)."""

    lines = [p.original_id for p in pairs]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_id_list(path: Path | str) -> list[str]:
    return [
        line.strip()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
