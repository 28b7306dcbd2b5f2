"""Detection matching, all-points average precision, mAP and the mAP-vs-iteration curve.

AP is computed in exact rational arithmetic and rounded to float once, so two
different but mathematically equal formulations agree bit for bit.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .dataset_io import GroundTruthBox
from .detection import Detection, iou

DEFAULT_MATCH_IOU = 0.5
DEFAULT_INTERVAL = 100
DEFAULT_MAX_BATCHES = 2500


@dataclass(frozen=True)
class RankedFlag:
    image_index: int
    category_id: int
    confidence: float
    is_tp: bool


@dataclass
class MatchResult:
    """Per-detection TP/FP flags (in matching order) and unmatched GT per image."""

    flags: list[RankedFlag] = field(default_factory=list)
    unmatched_gt: list[int] = field(default_factory=list)

    def for_category(self, category_id: int) -> "MatchResult":
        return MatchResult([f for f in self.flags if f.category_id == category_id], list(self.unmatched_gt))

    @property
    def tp(self) -> int:
        return sum(f.is_tp for f in self.flags)

    @property
    def fp(self) -> int:
        return sum(not f.is_tp for f in self.flags)


def match_detections(
    dets: Sequence[Sequence[Detection]],
    gts: Sequence[Sequence[GroundTruthBox]],
    iou_threshold: float = DEFAULT_MATCH_IOU,
) -> MatchResult:
    """Greedy one-to-one matching per image.

    Within an image, detections are visited by confidence descending (stable on
    ties); each claims the highest-IoU unmatched ground truth of its category
    with IoU >= ``iou_threshold``, otherwise it is a false positive.
    """
    if len(dets) != len(gts):
        raise ValueError(f"{len(dets)} detection lists for {len(gts)} ground-truth lists")
    result = MatchResult()
    for img, (img_dets, img_gts) in enumerate(zip(dets, gts)):
        taken = [False] * len(img_gts)
        order = sorted(range(len(img_dets)), key=lambda k: -img_dets[k].confidence)
        for k in order:
            d = img_dets[k]
            best, best_iou = -1, iou_threshold
            for g, gt in enumerate(img_gts):
                if taken[g] or gt.category_id != d.category_id:
                    continue
                o = iou(d.box, gt.box)
                if o >= best_iou and (best < 0 or o > best_iou):
                    best, best_iou = g, o
            if best >= 0:
                taken[best] = True
            result.flags.append(RankedFlag(img, d.category_id, d.confidence, best >= 0))
        result.unmatched_gt.append(taken.count(False))
    return result


def _ranked(flags: Sequence[RankedFlag]) -> list[bool]:
    # stable: equal confidences keep matching order (image order, then rank within image)
    return [f.is_tp for f in sorted(flags, key=lambda f: -f.confidence)]


def average_precision(matches: MatchResult, total_gt: int) -> float:
    """All-points AP: area under the monotone precision envelope over recall.

    ``total_gt == 0`` yields 0.0 with a ``RuntimeWarning``.
    """
    if total_gt < 0:
        raise ValueError("total_gt must be >= 0")
    if total_gt == 0:
        warnings.warn("average precision undefined without ground truth; reported as 0", RuntimeWarning)
        return 0.0
    ranked = _ranked(matches.flags)
    tp = fp = 0
    recall = [Fraction(0)]
    precision = [Fraction(0)]
    for hit in ranked:
        tp += hit
        fp += not hit
        recall.append(Fraction(tp, total_gt))
        precision.append(Fraction(tp, tp + fp))
    recall.append(Fraction(1))
    precision.append(Fraction(0))
    for i in range(len(precision) - 2, -1, -1):
        precision[i] = max(precision[i], precision[i + 1])
    area = sum(
        ((recall[i] - recall[i - 1]) * precision[i] for i in range(1, len(recall)) if recall[i] != recall[i - 1]),
        Fraction(0),
    )
    return float(area)


def mean_average_precision(per_category_ap: Sequence[float]) -> float:
    if len(per_category_ap) == 0:
        raise ValueError("need at least one category")
    return float(sum(per_category_ap) / len(per_category_ap))


@dataclass(frozen=True)
class EvalReport:
    per_category_ap: dict[int, float]
    map_value: float
    absent_categories: tuple[int, ...]


def evaluate(
    dets: Sequence[Sequence[Detection]],
    gts: Sequence[Sequence[GroundTruthBox]],
    iou_threshold: float = DEFAULT_MATCH_IOU,
    category_ids: Sequence[int] = (0, 1),
) -> EvalReport:
    """Per-category AP and mAP over the categories present in the ground truth."""
    matches = match_detections(dets, gts, iou_threshold)
    counts = {c: sum(g.category_id == c for img in gts for g in img) for c in category_ids}
    present = [c for c in category_ids if counts[c] > 0]
    aps = {c: average_precision(matches.for_category(c), counts[c]) for c in present}
    absent = tuple(c for c in category_ids if counts[c] == 0)
    return EvalReport(aps, mean_average_precision(list(aps.values())) if aps else 0.0, absent)


@dataclass(frozen=True)
class EvalCurvePoint:
    iteration: int
    map_value: float


@dataclass
class EvalSchedule:
    interval: int = DEFAULT_INTERVAL
    max_batches: int = DEFAULT_MAX_BATCHES
    iou_threshold: float = DEFAULT_MATCH_IOU

    def __post_init__(self):
        if self.interval < 1 or self.max_batches < 1:
            raise ValueError("interval and max_batches must be positive")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must lie in (0, 1]")


def eval_curve(
    snapshots: Sequence[tuple[int, Sequence[Sequence[Detection]]]],
    gts: Sequence[Sequence[GroundTruthBox]],
    schedule: EvalSchedule | None = None,
) -> list[EvalCurvePoint]:
    """mAP at each training snapshot ``(iteration, detections per image)``."""
    schedule = schedule or EvalSchedule()
    last = 0
    for iteration, _ in snapshots:
        if iteration > schedule.max_batches:
            raise ValueError(f"iteration {iteration} exceeds max_batches {schedule.max_batches}")
        if iteration <= 0 or iteration % schedule.interval:
            raise ValueError(f"iteration {iteration} is not a positive multiple of {schedule.interval}")
        if iteration <= last:
            raise ValueError("snapshot iterations must be strictly increasing")
        last = iteration
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return [
            EvalCurvePoint(iteration, evaluate(dets, gts, schedule.iou_threshold).map_value)
            for iteration, dets in snapshots
        ]


def curve_to_csv(points: Sequence[EvalCurvePoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "map"])
    for p in points:
        writer.writerow([p.iteration, repr(p.map_value)])
    return buf.getvalue()


def align_by_image(
    image_ids: Sequence[str],
    dets: Mapping[str, Sequence[Detection]],
    gts: Mapping[str, Sequence[GroundTruthBox]],
) -> tuple[list[list[Detection]], list[list[GroundTruthBox]]]:
    """Order detection and ground-truth lists by ``image_ids``; missing entries are empty."""
    return [list(dets.get(i, ())) for i in image_ids], [list(gts.get(i, ())) for i in image_ids]
