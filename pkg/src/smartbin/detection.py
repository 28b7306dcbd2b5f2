"""YOLOv3-style grid decoding, IoU and per-category greedy NMS.

Boxes are ``(cx, cy, w, h)`` tuples, normalised to the image.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

NUM_CATEGORIES = 2
SUPPRESSED_TOBJ = -100.0

DEFAULT_IOU_THRESHOLD = 0.45
DEFAULT_CONF_THRESHOLD = 0.25


@dataclass(frozen=True)
class Detection:
    box: tuple[float, float, float, float]
    category_id: int
    confidence: float
    objectness: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        object.__setattr__(self, "box", tuple(float(v) for v in self.box))

    def to_dict(self) -> dict:
        cx, cy, w, h = self.box
        d = {"category_id": self.category_id, "cx": cx, "cy": cy, "w": w, "h": h,
             "confidence": self.confidence}
        if self.objectness is not None:
            d["objectness"] = self.objectness
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Detection":
        return cls((d["cx"], d["cy"], d["w"], d["h"]), int(d["category_id"]),
                   float(d["confidence"]), d.get("objectness"))


@dataclass
class RawGridOutput:
    """One YOLO head: ``cells[cy, cx, anchor] = (tx, ty, tw, th, tobj, l0, l1)``."""

    grid_size: int
    input_size: int
    anchors: list[tuple[float, float]]
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float)
        expected = (self.grid_size, self.grid_size, len(self.anchors), 5 + NUM_CATEGORIES)
        if self.cells.shape != expected:
            raise ValueError(f"cells shape {self.cells.shape}, expected {expected}")

    @classmethod
    def empty(cls, grid_size: int, input_size: int, anchors) -> "RawGridOutput":
        cells = np.zeros((grid_size, grid_size, len(anchors), 5 + NUM_CATEGORIES))
        cells[..., 4] = SUPPRESSED_TOBJ
        return cls(grid_size, input_size, [tuple(a) for a in anchors], cells)

    @classmethod
    def from_dict(cls, d: dict) -> "RawGridOutput":
        raw = cls.empty(int(d["grid_size"]), int(d["input_size"]), d["anchors"])
        for cell in d.get("cells", []):
            t = cell["t"]
            if len(t) != 5 + NUM_CATEGORIES:
                raise ValueError(f"cell {cell!r}: expected {5 + NUM_CATEGORIES} values in t")
            raw.cells[int(cell["cy"]), int(cell["cx"]), int(cell["anchor"])] = t
        return raw

    def to_dict(self) -> dict:
        """Serialise only the non-default cells."""
        cells = []
        S, A = self.grid_size, len(self.anchors)
        for cy in range(S):
            for cx in range(S):
                for a in range(A):
                    t = self.cells[cy, cx, a]
                    if t[4] == SUPPRESSED_TOBJ and not np.any(t[:4]) and not np.any(t[5:]):
                        continue
                    cells.append({"cx": cx, "cy": cy, "anchor": a, "t": t.tolist()})
        return {"grid_size": self.grid_size, "input_size": self.input_size,
                "anchors": [list(a) for a in self.anchors], "cells": cells}


def load_raw(path: str | Path) -> RawGridOutput:
    return RawGridOutput.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def decode(raw: RawGridOutput) -> list[Detection]:
    """One detection per (cell, anchor), row-major over ``(cy, cx, anchor)``.

    Category is the argmax of the per-category sigmoids (ties -> lower id);
    confidence is ``sigmoid(tobj) * sigmoid(l_cat)``. Corners are clamped to [0, 1].
    """
    t = raw.cells
    if not np.all(np.isfinite(t)):
        raise ValueError("non-finite values in raw grid output")
    S = raw.grid_size
    anchors = np.asarray(raw.anchors, dtype=float)
    gy, gx = np.meshgrid(np.arange(S), np.arange(S), indexing="ij")
    cx = (_sigmoid(t[..., 0]) + gx[..., None]) / S
    cy = (_sigmoid(t[..., 1]) + gy[..., None]) / S
    w = anchors[:, 0] * np.exp(t[..., 2]) / raw.input_size
    h = anchors[:, 1] * np.exp(t[..., 3]) / raw.input_size
    x1, x2 = np.clip(cx - w / 2, 0, 1), np.clip(cx + w / 2, 0, 1)
    y1, y2 = np.clip(cy - h / 2, 0, 1), np.clip(cy + h / 2, 0, 1)
    obj = _sigmoid(t[..., 4])
    cls_prob = _sigmoid(t[..., 5:])
    cat = np.argmax(cls_prob, axis=-1)
    conf = obj * np.take_along_axis(cls_prob, cat[..., None], axis=-1)[..., 0]

    dets = []
    for idx in np.ndindex(*t.shape[:3]):
        box = ((x1[idx] + x2[idx]) / 2, (y1[idx] + y2[idx]) / 2, x2[idx] - x1[idx], y2[idx] - y1[idx])
        dets.append(Detection(box, int(cat[idx]), float(min(max(conf[idx], 0.0), 1.0)), float(obj[idx])))
    return dets


def iou(a: Sequence[float], b: Sequence[float]) -> float:
    """Intersection over union of two ``(cx, cy, w, h)`` boxes."""
    acx, acy, aw, ah = a
    bcx, bcy, bw, bh = b
    if aw <= 0 or ah <= 0 or bw <= 0 or bh <= 0:
        raise ValueError("degenerate box with non-positive width or height")
    ax1, ax2, ay1, ay2 = acx - aw / 2, acx + aw / 2, acy - ah / 2, acy + ah / 2
    bx1, bx2, by1, by2 = bcx - bw / 2, bcx + bw / 2, bcy - bh / 2, bcy + bh / 2
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    # areas from the same corner differences keep iou(a, a) exactly 1
    inter = iw * ih
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    return min(1.0, inter / (area_a + area_b - inter))


def rank_order(dets: Sequence[Detection]) -> list[int]:
    """Indices by confidence descending, then lower category, then input order."""
    return sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, dets[i].category_id, i))


def nms(
    dets: Sequence[Detection],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
) -> list[Detection]:
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    if not 0.0 <= conf_threshold <= 1.0:
        raise ValueError("conf_threshold must lie in [0, 1]")
    kept: list[Detection] = []
    for i in rank_order(dets):
        d = dets[i]
        if d.confidence < conf_threshold:
            continue
        if any(k.category_id == d.category_id and iou(k.box, d.box) >= iou_threshold for k in kept):
            continue
        kept.append(d)
    return kept


def write_detections(path: str | Path, images: Sequence[tuple[str, Sequence[Detection]]]) -> None:
    doc = [{"image_id": image_id, "detections": [d.to_dict() for d in dets]} for image_id, dets in images]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_detections(path: str | Path) -> list[tuple[str, list[Detection]]]:
    """Read a detections file: one ``{image_id, detections}`` object or a list of them."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, dict):
        doc = [doc]
    return [(str(d["image_id"]), [Detection.from_dict(x) for x in d["detections"]]) for d in doc]


def box_area(box: Sequence[float]) -> float:
    return float(box[2] * box[3])

