"""Event-driven controller for the two-compartment bin and its auxiliary-lid disc.

Normal cycle::

    Idle -ItemArrived-> ItemOnLid -Timeout(settle)-> Capturing -CaptureDone-> Classifying
    -VerdictReady-> Routing -RotationDone-> Dumping -DumpDone-> TransferringToComposter (bio)
                                                             -> Idle (non-bio)
    TransferringToComposter -TransferDone-> Idle

Any event not in the table sends the machine to ``Fault``; ``Reset`` recovers it,
abandoning the pending item and homing the disc.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .detection import Detection, box_area
from .svm import SvmModel, decision_value

BIO, NONBIO = 0, 1
HOME_ANGLE = 0.0
COMPARTMENT_ANGLE = {BIO: -90.0, NONBIO: 90.0}


class Phase(str, Enum):
    IDLE = "Idle"
    ITEM_ON_LID = "ItemOnLid"
    CAPTURING = "Capturing"
    CLASSIFYING = "Classifying"
    ROUTING = "Routing"
    DUMPING = "Dumping"
    TRANSFERRING = "TransferringToComposter"
    FAULT = "Fault"


class EventKind(str, Enum):
    ITEM_ARRIVED = "ItemArrived"
    CAPTURE_DONE = "CaptureDone"
    VERDICT_READY = "VerdictReady"
    ROTATION_DONE = "RotationDone"
    DUMP_DONE = "DumpDone"
    TRANSFER_DONE = "TransferDone"
    TIMEOUT = "Timeout"
    RESET = "Reset"


@dataclass(frozen=True)
class ClassifierVerdict:
    category_id: int
    confidence: float
    source: str  # "detector" | "svm_fallback"

    def __post_init__(self):
        if self.category_id not in (BIO, NONBIO):
            raise ValueError(f"category_id must be 0 or 1, got {self.category_id}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.source not in ("detector", "svm_fallback"):
            raise ValueError(f"unknown verdict source {self.source!r}")


@dataclass(frozen=True)
class BinEvent:
    kind: EventKind
    detections: tuple[Detection, ...] | None = None
    verdict: ClassifierVerdict | None = None

    @classmethod
    def item_arrived(cls) -> "BinEvent":
        return cls(EventKind.ITEM_ARRIVED)

    @classmethod
    def capture_done(cls, detections: Sequence[Detection] = ()) -> "BinEvent":
        return cls(EventKind.CAPTURE_DONE, detections=tuple(detections))

    @classmethod
    def verdict_ready(cls, verdict: ClassifierVerdict | None = None) -> "BinEvent":
        """``verdict=None`` asks the controller to classify the captured detections itself."""
        return cls(EventKind.VERDICT_READY, verdict=verdict)

    @classmethod
    def of(cls, kind: EventKind | str) -> "BinEvent":
        return cls(EventKind(kind))


@dataclass(frozen=True)
class ServoCommand:
    target_angle: float
    duration_ms: int

    def __post_init__(self):
        if not -90.0 <= self.target_angle <= 90.0:
            raise ValueError(f"target_angle {self.target_angle} outside [-90, 90]")


@dataclass(frozen=True)
class BinState:
    phase: Phase = Phase.IDLE
    pending_item: int | None = None
    disc_angle: float = HOME_ANGLE
    compartment_counts: tuple[int, int] = (0, 0)
    items_seen: int = 0
    abandoned: int = 0
    transfers: int = 0
    detections: tuple[Detection, ...] = ()
    verdict: ClassifierVerdict | None = None
    capture_attempts: int = 0
    diagnostic: str = ""


@dataclass(frozen=True)
class BinConfig:
    confidence_floor: float = 0.5
    capture_retries: int = 2
    servo_duration_ms: int = 500
    svm: SvmModel | None = None


# unknown or timed-out items go to the non-biodegradable side to keep the compost clean
FAIL_SAFE = ClassifierVerdict(NONBIO, 0.0, "svm_fallback")


def pooled_features(detections: Sequence[Detection]) -> np.ndarray:
    """Five pooled statistics fed to the fallback SVM.

    ``[max objectness, mean box area, score sum cat 0, score sum cat 1, count]``
    """
    if not detections:
        return np.zeros(5)
    obj = [d.objectness if d.objectness is not None else d.confidence for d in detections]
    return np.array([
        max(obj),
        float(np.mean([box_area(d.box) for d in detections])),
        sum(d.confidence for d in detections if d.category_id == BIO),
        sum(d.confidence for d in detections if d.category_id == NONBIO),
        float(len(detections)),
    ])


def classify_item(
    detections: Sequence[Detection],
    svm: SvmModel | None = None,
    config: BinConfig | None = None,
) -> ClassifierVerdict:
    """Detector-first verdict with SVM fallback and a non-biodegradable fail-safe.

    The SVM's +1 class is biodegradable. Its verdict confidence is
    ``sigmoid(|decision value|)``.
    """
    floor = (config or BinConfig()).confidence_floor
    confident = [d for d in detections if d.confidence >= floor]
    if confident:
        # stable max: the first of equally confident detections wins
        best = max(confident, key=lambda d: d.confidence)
        return ClassifierVerdict(best.category_id, best.confidence, "detector")
    if svm is not None:
        f = decision_value(svm, pooled_features(detections))
        category = BIO if f >= 0.0 else NONBIO
        return ClassifierVerdict(category, 1.0 / (1.0 + math.exp(-abs(f))), "svm_fallback")
    return FAIL_SAFE


def _fault(state: BinState, event: BinEvent) -> tuple[BinState, list[ServoCommand]]:
    msg = f"event {event.kind.value} illegal in phase {state.phase.value}"
    return replace(state, phase=Phase.FAULT, diagnostic=msg), []


def _route(state: BinState, verdict: ClassifierVerdict, cfg: BinConfig) -> tuple[BinState, list[ServoCommand]]:
    angle = COMPARTMENT_ANGLE[verdict.category_id]
    cmd = ServoCommand(angle, cfg.servo_duration_ms)
    return replace(state, phase=Phase.ROUTING, verdict=verdict, disc_angle=angle), [cmd]


def step(state: BinState, event: BinEvent, config: BinConfig | None = None) -> tuple[BinState, list[ServoCommand]]:
    """Apply one event. Never raises for an out-of-order event: the machine faults instead."""
    cfg = config or BinConfig()
    phase, kind = state.phase, event.kind

    if kind is EventKind.RESET:
        if phase is not Phase.FAULT:
            return _fault(state, event)
        abandoned = state.abandoned + (state.pending_item is not None)
        cmds = [ServoCommand(HOME_ANGLE, cfg.servo_duration_ms)] if state.disc_angle != HOME_ANGLE else []
        return BinState(compartment_counts=state.compartment_counts, items_seen=state.items_seen,
                        abandoned=abandoned, transfers=state.transfers), cmds

    if phase is Phase.IDLE and kind is EventKind.ITEM_ARRIVED:
        return replace(state, phase=Phase.ITEM_ON_LID, pending_item=state.items_seen,
                       items_seen=state.items_seen + 1, detections=(), verdict=None,
                       capture_attempts=0, diagnostic=""), []

    if phase is Phase.ITEM_ON_LID and kind is EventKind.TIMEOUT:
        return replace(state, phase=Phase.CAPTURING, capture_attempts=1), []

    if phase is Phase.CAPTURING:
        if kind is EventKind.CAPTURE_DONE:
            return replace(state, phase=Phase.CLASSIFYING, detections=tuple(event.detections or ())), []
        if kind is EventKind.TIMEOUT:
            # low-light frame: retry, then give up and route fail-safe
            if state.capture_attempts <= cfg.capture_retries:
                return replace(state, capture_attempts=state.capture_attempts + 1), []
            return _route(state, FAIL_SAFE, cfg)

    if phase is Phase.CLASSIFYING:
        if kind is EventKind.VERDICT_READY:
            verdict = event.verdict or classify_item(state.detections, cfg.svm, cfg)
            return _route(state, verdict, cfg)
        if kind is EventKind.TIMEOUT:
            return _route(state, FAIL_SAFE, cfg)

    if phase is Phase.ROUTING and kind is EventKind.ROTATION_DONE:
        return replace(state, phase=Phase.DUMPING), []

    if phase is Phase.DUMPING and kind is EventKind.DUMP_DONE:
        if state.verdict is None:
            return replace(state, phase=Phase.FAULT, diagnostic="dump completed without a routing verdict"), []
        bio, nonbio = state.compartment_counts
        cat = state.verdict.category_id
        counts = (bio + 1, nonbio) if cat == BIO else (bio, nonbio + 1)
        home = [ServoCommand(HOME_ANGLE, cfg.servo_duration_ms)]
        if cat == BIO:
            return replace(state, phase=Phase.TRANSFERRING, compartment_counts=counts,
                           pending_item=None, disc_angle=HOME_ANGLE), home
        return replace(state, phase=Phase.IDLE, compartment_counts=counts, pending_item=None,
                       disc_angle=HOME_ANGLE, detections=(), verdict=None), home

    if phase is Phase.TRANSFERRING and kind is EventKind.TRANSFER_DONE:
        return replace(state, phase=Phase.IDLE, transfers=state.transfers + 1,
                       detections=(), verdict=None), []

    if phase is Phase.FAULT:
        # stay faulted; keep the first diagnostic
        return state, []
    return _fault(state, event)


def transition_table() -> dict[tuple[Phase, EventKind], Phase]:
    """Successor phase of every (phase, event) pair from a representative state."""
    table = {}
    for phase in Phase:
        for kind in EventKind:
            state = BinState(phase=phase, pending_item=0, items_seen=1,
                             verdict=ClassifierVerdict(BIO, 1.0, "detector"))
            table[phase, kind] = step(state, BinEvent(kind))[0].phase
    return table


@dataclass(frozen=True)
class TimedEvent:
    t_ms: int
    event: BinEvent


@dataclass(frozen=True)
class TraceEntry:
    t_ms: int | None
    state: BinState
    commands: tuple[ServoCommand, ...] = ()

    def to_dict(self) -> dict:
        return {
            "t_ms": self.t_ms,
            "phase": self.state.phase.value,
            "disc_angle": self.state.disc_angle,
            "counts": list(self.state.compartment_counts),
            "commands": [{"target_angle": c.target_angle, "duration_ms": c.duration_ms} for c in self.commands],
        }


def run_simulation(script: Sequence[TimedEvent], config: BinConfig | None = None) -> list[TraceEntry]:
    """Replay a timed event script; the first trace entry is the initial Idle state."""
    last = None
    for item in script:
        if not isinstance(item, TimedEvent) or not isinstance(item.event, BinEvent):
            raise ValueError(f"malformed script entry {item!r}")
        if last is not None and item.t_ms <= last:
            raise ValueError(f"script times must be strictly increasing (t_ms={item.t_ms} after {last})")
        last = item.t_ms
    state = BinState()
    trace = [TraceEntry(None, state)]
    for item in script:
        state, cmds = step(state, item.event, config)
        trace.append(TraceEntry(item.t_ms, state, tuple(cmds)))
    return trace


def item_script(verdicts: Sequence[int | ClassifierVerdict | Sequence[Detection]], start_ms: int = 0,
                spacing_ms: int = 100) -> list[TimedEvent]:
    """Script for a sequence of items processed one after another without faults.

    Each entry is a category id, a ready verdict, or the item's detections (in
    which case the controller classifies them).
    """
    script = []
    t = start_ms

    def add(ev):
        nonlocal t
        script.append(TimedEvent(t, ev))
        t += spacing_ms

    for v in verdicts:
        dets: Sequence[Detection] = ()
        if isinstance(v, ClassifierVerdict):
            verdict = v
        elif isinstance(v, (int, np.integer)):
            verdict = ClassifierVerdict(int(v), 1.0, "detector")
        else:
            dets, verdict = tuple(v), None
        add(BinEvent.item_arrived())
        add(BinEvent.of(EventKind.TIMEOUT))
        add(BinEvent.capture_done(dets))
        add(BinEvent.verdict_ready(verdict))
        add(BinEvent.of(EventKind.ROTATION_DONE))
        add(BinEvent.of(EventKind.DUMP_DONE))
        if verdict is None or verdict.category_id == BIO:
            add(BinEvent.of(EventKind.TRANSFER_DONE))
    return script


def _event_from_json(entry: dict, fixtures_dir: Path | None) -> BinEvent:
    kind = EventKind(entry["event"])
    payload: Any = entry.get("payload") or {}
    if kind is EventKind.CAPTURE_DONE:
        if "raw" in payload:
            from .detection import decode, load_raw, nms

            base = fixtures_dir if fixtures_dir is not None else Path(".")
            raw = load_raw(base / payload["raw"])
            dets = nms(decode(raw), payload.get("iou_threshold", 0.45), payload.get("conf_threshold", 0.25))
        else:
            dets = [Detection.from_dict(d) for d in payload.get("detections", [])]
        return BinEvent.capture_done(dets)
    if kind is EventKind.VERDICT_READY and "category_id" in payload:
        return BinEvent.verdict_ready(ClassifierVerdict(int(payload["category_id"]),
                                                        float(payload.get("confidence", 1.0)),
                                                        payload.get("source", "detector")))
    return BinEvent(kind)


def load_script(path: str | Path, fixtures_dir: str | Path | None = None) -> list[TimedEvent]:
    """Parse a JSON event script ``[{t_ms, event, payload}, ...]``.

    ``CaptureDone`` payloads carry either ``detections`` or a ``raw`` grid fixture
    (resolved against ``fixtures_dir``) that is decoded and NMS-filtered here.
    ``VerdictReady`` without ``category_id`` defers classification to the controller.
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, list):
        raise ValueError("event script must be a JSON array")
    fixtures = Path(fixtures_dir) if fixtures_dir is not None else None
    script = []
    for entry in doc:
        try:
            script.append(TimedEvent(int(entry["t_ms"]), _event_from_json(entry, fixtures)))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed script entry {entry!r}: {exc}") from None
    return script


def trace_to_jsonl(trace: Sequence[TraceEntry]) -> str:
    return "".join(json.dumps(e.to_dict()) + "\n" for e in trace)
