import random

import numpy as np
import pytest

from smartbin.bin_controller import (
    BIO,
    FAIL_SAFE,
    NONBIO,
    BinConfig,
    BinEvent,
    BinState,
    ClassifierVerdict,
    EventKind,
    Phase,
    ServoCommand,
    TimedEvent,
    classify_item,
    item_script,
    load_script,
    pooled_features,
    run_simulation,
    step,
    trace_to_jsonl,
    transition_table,
)
from smartbin.detection import Detection
from smartbin.svm import KernelSpec, SvmModel

E = EventKind
P = Phase

LEGAL = {
    (P.IDLE, E.ITEM_ARRIVED): P.ITEM_ON_LID,
    (P.ITEM_ON_LID, E.TIMEOUT): P.CAPTURING,
    (P.CAPTURING, E.CAPTURE_DONE): P.CLASSIFYING,
    (P.CAPTURING, E.TIMEOUT): P.CAPTURING,
    (P.CLASSIFYING, E.VERDICT_READY): P.ROUTING,
    (P.CLASSIFYING, E.TIMEOUT): P.ROUTING,
    (P.ROUTING, E.ROTATION_DONE): P.DUMPING,
    (P.DUMPING, E.DUMP_DONE): P.TRANSFERRING,  # the representative verdict is biodegradable
    (P.TRANSFERRING, E.TRANSFER_DONE): P.IDLE,
    (P.FAULT, E.RESET): P.IDLE,
}


def verdict(cat, conf=0.9):
    return ClassifierVerdict(cat, conf, "detector")


def drive(events, config=None):
    state, cmds = BinState(), []
    for ev in events:
        state, c = step(state, ev, config)
        cmds.extend(c)
    return state, cmds


def to_lid():
    return [BinEvent.item_arrived(), BinEvent.of(E.TIMEOUT)]


class TestTransitionTable:
    def test_exhaustive(self):
        table = transition_table()
        assert len(table) == len(Phase) * len(EventKind)
        for (phase, kind), succ in table.items():
            assert succ == LEGAL.get((phase, kind), P.FAULT), (phase, kind)

    def test_fault_is_sticky_and_keeps_diagnostic(self):
        s, _ = step(BinState(), BinEvent.of(E.DUMP_DONE))
        assert s.phase is P.FAULT and "DumpDone" in s.diagnostic
        for kind in EventKind:
            if kind is not E.RESET:
                s2, cmds = step(s, BinEvent(kind))
                assert s2 == s and cmds == []

    def test_illegal_never_raises(self):
        for phase in Phase:
            for kind in EventKind:
                step(BinState(phase=phase), BinEvent(kind))


class TestStepExamples:
    def test_entry(self):
        s, cmds = step(BinState(), BinEvent.item_arrived())
        assert s.phase is P.ITEM_ON_LID and cmds == []

    def test_nonbio_route_then_rotation(self):
        s, cmds = drive(to_lid() + [BinEvent.capture_done(), BinEvent.verdict_ready(verdict(NONBIO, 0.9))])
        assert s.phase is P.ROUTING
        assert cmds == [ServoCommand(90.0, 500)]
        s, _ = step(s, BinEvent.of(E.ROTATION_DONE))
        assert s.phase is P.DUMPING

    def test_classify_timeout_fail_safe(self):
        s, cmds = drive(to_lid() + [BinEvent.capture_done(), BinEvent.of(E.TIMEOUT)])
        assert s.phase is P.ROUTING
        assert s.verdict == FAIL_SAFE and s.verdict.category_id == NONBIO
        assert cmds == [ServoCommand(90.0, 500)]

    def test_capture_retries_then_fail_safe(self):
        events = to_lid() + [BinEvent.of(E.TIMEOUT)] * 2
        s, cmds = drive(events)
        assert s.phase is P.CAPTURING and s.capture_attempts == 3 and cmds == []
        s, cmds = step(s, BinEvent.of(E.TIMEOUT))
        assert s.phase is P.ROUTING and s.verdict == FAIL_SAFE

    def test_retry_then_success(self):
        s, _ = drive(to_lid() + [BinEvent.of(E.TIMEOUT), BinEvent.capture_done()])
        assert s.phase is P.CLASSIFYING

    def test_bio_dump_transfers(self):
        s, cmds = drive(to_lid() + [BinEvent.capture_done(), BinEvent.verdict_ready(verdict(BIO)),
                                    BinEvent.of(E.ROTATION_DONE), BinEvent.of(E.DUMP_DONE)])
        assert s.phase is P.TRANSFERRING and s.compartment_counts == (1, 0)
        assert [c.target_angle for c in cmds] == [-90.0, 0.0]
        s, _ = step(s, BinEvent.of(E.TRANSFER_DONE))
        assert s.phase is P.IDLE and s.transfers == 1

    def test_controller_classifies_when_verdict_absent(self):
        dets = [Detection((0.5, 0.5, 0.2, 0.2), NONBIO, 0.8)]
        s, _ = drive(to_lid() + [BinEvent.capture_done(dets), BinEvent.verdict_ready()])
        assert s.verdict == ClassifierVerdict(NONBIO, 0.8, "detector")

    def test_reset_abandons_and_homes(self):
        s, _ = drive(to_lid() + [BinEvent.capture_done(), BinEvent.verdict_ready(verdict(BIO)),
                                 BinEvent.of(E.DUMP_DONE)])
        assert s.phase is P.FAULT and s.disc_angle == -90.0
        s, cmds = step(s, BinEvent.of(E.RESET))
        assert s.phase is P.IDLE and s.abandoned == 1 and s.pending_item is None
        assert cmds == [ServoCommand(0.0, 500)]

    def test_servo_range(self):
        with pytest.raises(ValueError):
            ServoCommand(120.0, 500)


class TestClassifyItem:
    def test_single_detection(self):
        assert classify_item([Detection((0.5, 0.5, 0.2, 0.2), 0, 0.9)]) == ClassifierVerdict(0, 0.9, "detector")

    def test_empty_no_svm(self):
        assert classify_item([]) == ClassifierVerdict(1, 0.0, "svm_fallback")

    def test_max_confidence(self):
        dets = [Detection((0.3, 0.3, 0.2, 0.2), 0, 0.6), Detection((0.7, 0.7, 0.2, 0.2), 1, 0.7)]
        assert classify_item(dets) == ClassifierVerdict(1, 0.7, "detector")

    def test_below_floor_uses_svm(self):
        dets = [Detection((0.5, 0.5, 0.2, 0.2), 1, 0.3, objectness=0.4)]
        np.testing.assert_allclose(pooled_features(dets), [0.4, 0.04, 0.0, 0.3, 1.0])
        # decision = 2 * sum(cat 0 score) - 1 * sum(cat 1 score) + 0.1 = -0.2
        svm = SvmModel(KernelSpec.linear(), 1.0, 0.1, np.zeros((0, 5)), np.zeros(0), np.zeros(0),
                       np.array([0.0, 0.0, 2.0, -1.0, 0.0]))
        v = classify_item(dets, svm)
        assert v.category_id == NONBIO and v.source == "svm_fallback"
        assert v.confidence == pytest.approx(1 / (1 + np.exp(-0.2)), rel=1e-12)

    def test_svm_positive_is_bio(self):
        svm = SvmModel(KernelSpec.linear(), 1.0, 1.0, np.zeros((0, 5)), np.zeros(0), np.zeros(0), np.zeros(5))
        assert classify_item([], svm).category_id == BIO

    def test_floor_from_config(self):
        dets = [Detection((0.5, 0.5, 0.2, 0.2), 0, 0.3)]
        assert classify_item(dets, config=BinConfig(confidence_floor=0.25)).source == "detector"


class TestRunSimulation:
    def test_empty(self):
        trace = run_simulation([])
        assert len(trace) == 1 and trace[0].state == BinState()

    def test_one_bio(self):
        trace = run_simulation(item_script([BIO]))
        assert trace[-1].state.compartment_counts == (1, 0)
        angles = [c.target_angle for e in trace for c in e.commands]
        assert angles.count(-90.0) == 1

    def test_three_items(self):
        trace = run_simulation(item_script([BIO, NONBIO, BIO]))
        assert trace[-1].state.compartment_counts == (2, 1)
        assert trace[-1].state.phase is P.IDLE

    def test_times_must_increase(self):
        with pytest.raises(ValueError):
            run_simulation([TimedEvent(5, BinEvent.item_arrived()), TimedEvent(5, BinEvent.of(E.TIMEOUT))])

    def test_malformed_entry(self):
        with pytest.raises(ValueError):
            run_simulation([("0", "ItemArrived")])

    def test_deterministic_jsonl(self):
        script = item_script([BIO, NONBIO])
        assert trace_to_jsonl(run_simulation(script)) == trace_to_jsonl(run_simulation(script))

    def test_load_script(self, tmp_path):
        import json
        doc = [
            {"t_ms": 0, "event": "ItemArrived"},
            {"t_ms": 10, "event": "Timeout"},
            {"t_ms": 20, "event": "CaptureDone", "payload": {"detections": [
                {"category_id": 0, "cx": 0.5, "cy": 0.5, "w": 0.2, "h": 0.2, "confidence": 0.9}]}},
            {"t_ms": 30, "event": "VerdictReady"},
            {"t_ms": 40, "event": "RotationDone"},
            {"t_ms": 50, "event": "DumpDone"},
            {"t_ms": 60, "event": "TransferDone"},
        ]
        (tmp_path / "s.json").write_text(json.dumps(doc))
        trace = run_simulation(load_script(tmp_path / "s.json"))
        assert trace[-1].state.compartment_counts == (1, 0)
        (tmp_path / "bad.json").write_text(json.dumps([{"event": "ItemArrived"}]))
        with pytest.raises(ValueError):
            load_script(tmp_path / "bad.json")


def random_script(rng, n_items):
    """Mostly well-formed item cycles with retries, timeouts, stray events and resets."""
    events = []
    for _ in range(n_items):
        events += [BinEvent.item_arrived(), BinEvent.of(E.TIMEOUT)]
        events += [BinEvent.of(E.TIMEOUT)] * rng.randrange(0, 4)
        events.append(BinEvent.capture_done())
        if rng.random() < 0.15:
            events.append(BinEvent.of(E.TIMEOUT))
        else:
            events.append(BinEvent.verdict_ready(verdict(rng.randrange(2), rng.random())))
        events += [BinEvent.of(E.ROTATION_DONE), BinEvent.of(E.DUMP_DONE), BinEvent.of(E.TRANSFER_DONE)]
        if rng.random() < 0.1:
            events.insert(rng.randrange(len(events) + 1), BinEvent(rng.choice(list(EventKind))))
        if rng.random() < 0.1:
            events.append(BinEvent.of(E.RESET))
    cut = len(events) if rng.random() < 0.7 else rng.randrange(len(events) + 1)
    return [TimedEvent(10 * i, ev) for i, ev in enumerate(events[:cut])]


def check_invariants(trace):
    prev = trace[0].state
    disc_out = False
    transfer_owed = False
    for entry in trace[1:]:
        s = entry.state
        angles = [c.target_angle for c in entry.commands]
        # routing soundness
        if s.compartment_counts != prev.compartment_counts:
            cat = prev.verdict.category_id
            expected = (prev.compartment_counts[0] + (cat == BIO), prev.compartment_counts[1] + (cat == NONBIO))
            assert s.compartment_counts == expected
            assert prev.phase is P.DUMPING
        assert s.compartment_counts[0] >= prev.compartment_counts[0]
        assert s.compartment_counts[1] >= prev.compartment_counts[1]
        # disc conservation
        for a in angles:
            disc_out = a != 0.0
        if prev.phase is P.IDLE and s.phase is P.ITEM_ON_LID:
            assert not disc_out and s.disc_angle == 0.0
        assert s.disc_angle in (-90.0, 0.0, 90.0)
        # one composter transfer per bio dump
        if s.compartment_counts[0] > prev.compartment_counts[0]:
            assert s.phase is P.TRANSFERRING and not transfer_owed
            transfer_owed = True
        if s.transfers > prev.transfers:
            assert transfer_owed and s.transfers == prev.transfers + 1
            transfer_owed = False
        if prev.phase is P.FAULT and s.phase is P.IDLE:
            # an operator reset abandons whatever transfer was in progress
            transfer_owed = False
        # no lost items
        in_flight = s.pending_item is not None
        assert s.items_seen == sum(s.compartment_counts) + s.abandoned + in_flight
        prev = s
    final = trace[-1].state
    assert final.transfers <= final.compartment_counts[0]


def test_randomized_scripts_hold_invariants():
    rng = random.Random(2024)
    faults = 0
    for _ in range(500):
        trace = run_simulation(random_script(rng, rng.randrange(1, 8)))
        check_invariants(trace)
        faults += any(e.state.phase is P.FAULT for e in trace)
    assert 0 < faults < 500


def test_clean_scripts_count_verdicts():
    rng = random.Random(7)
    for _ in range(50):
        cats = [rng.randrange(2) for _ in range(rng.randrange(0, 12))]
        trace = run_simulation(item_script(cats))
        assert trace[-1].state.compartment_counts == (cats.count(BIO), cats.count(NONBIO))
        assert trace[-1].state.transfers == cats.count(BIO)
        assert all(e.state.phase is not P.FAULT for e in trace)
