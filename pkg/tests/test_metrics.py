import random
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smartbin.dataset_io import GroundTruthBox
from smartbin.detection import Detection
from smartbin.metrics import (
    EvalCurvePoint,
    EvalSchedule,
    MatchResult,
    RankedFlag,
    average_precision,
    curve_to_csv,
    eval_curve,
    evaluate,
    match_detections,
    mean_average_precision,
)

from oracles import all_hit_sequences, ap_by_enumeration


def ranked(hits):
    """MatchResult whose flags rank in the given order (strictly decreasing confidence)."""
    n = len(hits)
    return MatchResult([RankedFlag(0, 0, (n - k) / (n + 1), h) for k, h in enumerate(hits)], [0])


def gt(cat, cx, cy, w, h):
    return GroundTruthBox(cat, cx, cy, w, h)


def perfect(gts, conf=1.0):
    return [[Detection(g.box, g.category_id, conf) for g in img] for img in gts]


GTS = [
    [gt(0, 0.3, 0.3, 0.2, 0.2), gt(1, 0.7, 0.7, 0.2, 0.3)],
    [gt(0, 0.5, 0.5, 0.4, 0.4)],
]


class TestMatching:
    def test_perfect_all_tp(self):
        m = match_detections(perfect(GTS), GTS)
        assert m.tp == 3 and m.fp == 0
        assert m.unmatched_gt == [0, 0]

    def test_no_detections(self):
        m = match_detections([[], []], GTS)
        assert m.tp == 0 and m.flags == []
        assert m.unmatched_gt == [2, 1]

    def test_two_detections_one_gt(self):
        g = [[gt(0, 0.5, 0.5, 0.4, 0.4)]]
        low = Detection((0.5, 0.5, 0.4, 0.4), 0, 0.6)
        high = Detection((0.52, 0.5, 0.4, 0.4), 0, 0.9)
        m = match_detections([[low, high]], g)
        assert [(f.confidence, f.is_tp) for f in m.flags] == [(0.9, True), (0.6, False)]

    def test_category_must_agree(self):
        m = match_detections([[Detection((0.3, 0.3, 0.2, 0.2), 1, 0.9)]], [[gt(0, 0.3, 0.3, 0.2, 0.2)]])
        assert m.fp == 1 and m.unmatched_gt == [1]

    def test_highest_iou_gt_claimed(self):
        g = [[gt(0, 0.40, 0.5, 0.2, 0.2), gt(0, 0.45, 0.5, 0.2, 0.2)]]
        d = Detection((0.46, 0.5, 0.2, 0.2), 0, 0.8)
        m = match_detections([[d, Detection((0.40, 0.5, 0.2, 0.2), 0, 0.7)]], g)
        assert m.tp == 2

    def test_iou_threshold_inclusive(self):
        g = [[gt(0, 0.5, 0.5, 0.2, 0.2)]]
        m = match_detections([[Detection((0.5, 0.5, 0.2, 0.2), 0, 0.5)]], g, iou_threshold=1.0)
        assert m.tp == 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            match_detections([[]], GTS)


class TestAveragePrecision:
    def test_perfect(self):
        assert average_precision(ranked([True, True, True]), 3) == 1.0

    def test_fp_then_tp(self):
        assert average_precision(ranked([False, True]), 1) == 0.5

    def test_tp_then_fp(self):
        assert average_precision(ranked([True, False]), 1) == 1.0

    def test_partial_recall(self):
        # precisions 1, 1/2, 2/3 at the two hits; envelope 1 then 2/3 over recall 1/4 each
        assert average_precision(ranked([True, False, True]), 4) == pytest.approx(5 / 12, abs=1e-15)

    def test_no_detections(self):
        assert average_precision(ranked([]), 2) == 0.0

    def test_zero_gt_flagged(self):
        with pytest.warns(RuntimeWarning):
            assert average_precision(ranked([False]), 0) == 0.0

    def test_negative_gt(self):
        with pytest.raises(ValueError):
            average_precision(ranked([]), -1)

    def test_exhaustive_enumeration_exact(self):
        checked = 0
        for seq in all_hit_sequences(6, 3):
            for total in range(max(1, sum(seq)), 4):
                assert average_precision(ranked(list(seq)), total) == ap_by_enumeration(seq, total)
                checked += 1
        assert checked == 189

    def test_equal_confidence_keeps_matching_order(self):
        flags = [RankedFlag(0, 0, 0.5, False), RankedFlag(0, 0, 0.5, True)]
        assert average_precision(MatchResult(flags, [0]), 1) == 0.5


@given(st.lists(st.booleans(), max_size=12), st.integers(0, 4))
def test_ap_bounds_and_trailing_fp_upgrade(hits, extra_gt):
    total = sum(hits) + extra_gt
    if total == 0:
        return
    ap = average_precision(ranked(hits), total)
    assert 0.0 <= ap <= 1.0
    if hits and not hits[-1] and extra_gt > 0:
        upgraded = average_precision(ranked(hits[:-1] + [True]), total)
        assert upgraded >= ap


def test_ap_through_matching_matches_oracle():
    rng = random.Random(11)
    for _ in range(300):
        gts = [[gt(rng.randrange(2), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), 0.2, 0.2)
                for _ in range(rng.randrange(0, 4))]]
        dets = [[Detection((rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), 0.2, 0.2), rng.randrange(2),
                           rng.randrange(1, 1000) / 1000) for _ in range(rng.randrange(0, 7))]]
        m = match_detections(dets, gts)
        for cat in (0, 1):
            total = sum(g.category_id == cat for g in gts[0])
            if total == 0:
                continue
            seq = [f.is_tp for f in sorted(m.for_category(cat).flags, key=lambda f: -f.confidence)]
            assert average_precision(m.for_category(cat), total) == ap_by_enumeration(seq, total)


class TestMeanAp:
    @pytest.mark.parametrize("aps,expected", [([1.0, 1.0], 1.0), ([1.0, 0.0], 0.5), ([0.5, 0.25], 0.375)])
    def test_examples(self, aps, expected):
        assert mean_average_precision(aps) == expected

    def test_empty(self):
        with pytest.raises(ValueError):
            mean_average_precision([])

    def test_perfect_evaluate(self):
        r = evaluate(perfect(GTS), GTS)
        assert r.map_value == 1.0
        assert r.per_category_ap == {0: 1.0, 1: 1.0}

    def test_absent_category_excluded(self):
        gts = [[gt(0, 0.5, 0.5, 0.2, 0.2)]]
        r = evaluate(perfect(gts), gts)
        assert r.absent_categories == (1,)
        assert r.map_value == 1.0


def snapshots_for(iterations, dets):
    return [(i, dets) for i in iterations]


class TestEvalCurve:
    def test_hundred_step_schedule_25_points(self):
        pts = eval_curve(snapshots_for(range(100, 2501, 100), perfect(GTS)), GTS)
        assert len(pts) == 25
        assert pts[-1] == EvalCurvePoint(2500, 1.0)

    def test_single_perfect(self):
        assert eval_curve([(100, perfect(GTS))], GTS) == [EvalCurvePoint(100, 1.0)]

    def test_empty_detections(self):
        pts = eval_curve(snapshots_for([100, 200], [[], []]), GTS)
        assert [p.map_value for p in pts] == [0.0, 0.0]

    @pytest.mark.parametrize("iters", [[100, 2600], [150], [200, 100], [100, 100], [0]])
    def test_schedule_errors(self, iters):
        with pytest.raises(ValueError):
            eval_curve(snapshots_for(iters, [[], []]), GTS)

    def test_custom_schedule(self):
        pts = eval_curve(snapshots_for([50, 100], [[], []]), GTS, EvalSchedule(interval=50, max_batches=100))
        assert [p.iteration for p in pts] == [50, 100]

    def test_csv(self):
        text = curve_to_csv([EvalCurvePoint(100, 0.5), EvalCurvePoint(200, 1.0)])
        assert text == "iteration,map\n100,0.5\n200,1.0\n"
        rows = np.genfromtxt(text.splitlines(), delimiter=",", names=True)
        np.testing.assert_array_equal(rows["iteration"], [100, 200])
