import json
from pathlib import Path

import numpy as np
import pytest

from smartbin.detection import RawGridOutput

FIXTURES = Path(__file__).parent / "fixtures"

# grid-search oracle objectives (oracles.grid_search_svm, default arguments)
SVM_ORACLE_OBJECTIVE = {
    "sep20_2d": 0.6700766634853829,
    "sep15_2d": 0.31961701993113495,
    "sep10_1d": 0.71712861701865,
    "ovl25_2d_C1": 9.019559655944862,
    "ovl25_2d_C10": 98.56336185331598,
    "ovl12_1d_C05": 4.9009874999999985,
}
SEP20_ORACLE_W = (-0.38081390398001475, -1.093221888504921)
SEP20_ORACLE_B = 0.42569500648242004


@pytest.fixture(scope="session")
def svm_fixtures():
    return json.loads((FIXTURES / "svm_fixtures.json").read_text())


def logit(p):
    return float(np.log(p / (1 - p)))


def perfect_raw(items, grid_size=13, input_size=416, anchors=((116, 90), (156, 198), (373, 326))):
    """Raw grid whose decoded output reproduces ``items`` = [(cat, cx, cy, w, h)] exactly.

    Each box goes to the cell containing its center, anchor 0, with objectness
    and class probability 0.99 (confidence 0.9801); everything else is suppressed.
    """
    raw = RawGridOutput.empty(grid_size, input_size, anchors)
    aw, ah = anchors[0]
    for cat, cx, cy, w, h in items:
        gx, gy = int(cx * grid_size), int(cy * grid_size)
        t = np.zeros(7)
        t[0] = logit(cx * grid_size - gx)
        t[1] = logit(cy * grid_size - gy)
        t[2] = np.log(w * input_size / aw)
        t[3] = np.log(h * input_size / ah)
        t[4] = logit(0.99)
        t[5 + cat] = logit(0.99)
        t[5 + (1 - cat)] = logit(0.01)
        raw.cells[gy, gx, 0] = t
    return raw


def pytest_terminal_summary(terminalreporter):
    import sys

    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(acceptance.RESULTS, key=lambda s: int(s[7:9])):
        terminalreporter.write_line(line)
