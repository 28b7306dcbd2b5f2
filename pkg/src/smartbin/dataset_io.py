"""YOLO-format annotation parsing, dataset manifests and the seeded train/test split."""

from __future__ import annotations

import json
import math
from fractions import Fraction
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

CATEGORY_NAMES = ("biodegradable", "non-biodegradable")


class LabelFormatError(ValueError):
    """A label line could not be parsed or failed validation."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class GroundTruthBox:
    category_id: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("w", "h"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name}={v} outside (0, 1]")

    @property
    def box(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[tuple[str, tuple[GroundTruthBox, ...]], ...]
    category_names: tuple[str, ...] = CATEGORY_NAMES

    def __post_init__(self):
        ids = [image_id for image_id, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate image_id in manifest")

    @property
    def image_ids(self) -> list[str]:
        return [image_id for image_id, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def boxes(self) -> dict[str, tuple[GroundTruthBox, ...]]:
        return dict(self.entries)


@dataclass(frozen=True)
class SplitResult:
    train_ids: list[str]
    test_ids: list[str]
    seed: int

    def to_json(self) -> str:
        doc = {"seed": self.seed, "train": self.train_ids, "test": self.test_ids}
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SplitResult":
        doc = json.loads(text)
        return cls(list(doc["train"]), list(doc["test"]), int(doc["seed"]))


def parse_label_file(text: str, category_count: int = 2) -> list[GroundTruthBox]:
    """Parse a YOLO txt label file (``category cx cy w h`` per line).

    Blank lines are skipped. Errors carry the 1-based line number.
    """
    if category_count < 1:
        raise ValueError("category_count must be >= 1")
    boxes = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 5:
            raise LabelFormatError(f"expected 5 fields, got {len(tokens)}", lineno)
        try:
            cat = int(tokens[0])
        except ValueError:
            raise LabelFormatError(f"category {tokens[0]!r} is not an integer", lineno) from None
        try:
            cx, cy, w, h = (float(t) for t in tokens[1:])
        except ValueError:
            raise LabelFormatError("non-numeric coordinate", lineno) from None
        if not 0 <= cat < category_count:
            raise LabelFormatError(f"category {cat} out of range [0, {category_count})", lineno)
        if not all(math.isfinite(v) for v in (cx, cy, w, h)):
            raise LabelFormatError("non-finite coordinate", lineno)
        try:
            boxes.append(GroundTruthBox(cat, cx, cy, w, h))
        except ValueError as exc:
            raise LabelFormatError(str(exc), lineno) from None
    return boxes


def serialize_labels(boxes: Sequence[GroundTruthBox]) -> str:
    """Canonical YOLO txt form; ``repr`` floats so the text re-parses exactly."""
    return "".join(
        f"{b.category_id} {b.cx!r} {b.cy!r} {b.w!r} {b.h!r}\n" for b in boxes
    )


def read_category_names(path: str | Path) -> tuple[str, ...]:
    names = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    names = [n for n in names if n]
    if not names:
        raise ValueError(f"{path}: no category names")
    return tuple(names)


def load_manifest(path: str | Path, category_names: Sequence[str] = CATEGORY_NAMES) -> DatasetManifest:
    """Load a JSON manifest ``[{"image_id": ..., "label_path": ...}, ...]``.

    Relative label paths resolve against the manifest's directory.
    """
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(doc, list):
        raise ValueError(f"{path}: manifest must be a JSON array")
    entries = []
    for item in doc:
        try:
            image_id, label_path = str(item["image_id"]), item["label_path"]
        except (KeyError, TypeError):
            raise ValueError(f"{path}: entry {item!r} lacks image_id/label_path") from None
        label_file = path.parent / label_path
        boxes = parse_label_file(label_file.read_text(encoding="utf-8"), len(category_names))
        entries.append((image_id, tuple(boxes)))
    return DatasetManifest(tuple(entries), tuple(category_names))


def split_dataset(manifest: DatasetManifest, train_fraction: float = 0.9, seed: int = 0) -> SplitResult:
    """Seeded Fisher-Yates shuffle of the manifest order, then a prefix cut.

    ``len(train) == floor(train_fraction * N)``; the remaining ids form the test set.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    ids = manifest.image_ids
    if not ids:
        raise ValueError("cannot split an empty manifest")
    rng = random.Random(seed)
    # explicit Fisher-Yates so the permutation does not depend on library internals
    for i in range(len(ids) - 1, 0, -1):
        j = rng.randrange(i + 1)
        ids[i], ids[j] = ids[j], ids[i]
    # exact decimal arithmetic: floor(0.7 * 90) must be 63, not 62
    n_train = math.floor(Fraction(repr(float(train_fraction))) * len(ids))
    return SplitResult(ids[:n_train], ids[n_train:], seed)
