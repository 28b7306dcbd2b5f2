"""Regenerate svm_fixtures.json (small 1-D/2-D problems for oracle comparison)."""

import json
from pathlib import Path

import numpy as np


def separable(rng, m, d, gap):
    w = rng.normal(size=d)
    w /= np.linalg.norm(w)
    X, y = [], []
    while len(X) < m:
        x = rng.uniform(-3, 3, size=d).round(2)
        s = x @ w + 0.3
        if abs(s) >= gap:
            X.append(x.tolist())
            y.append(1 if s > 0 else -1)
    return X, y


def overlapping(rng, m, d, noise):
    X = rng.normal(size=(m, d)).round(2)
    w = rng.normal(size=d)
    y = np.where(X @ w + noise * rng.normal(size=m) > 0, 1, -1)
    y[0], y[1] = 1, -1
    return X.tolist(), y.tolist()


def main():
    rng = np.random.default_rng(20240611)
    fixtures = []
    for name, (X, y), C in [
        ("sep20_2d", separable(rng, 20, 2, 0.6), 1e6),
        ("sep15_2d", separable(rng, 15, 2, 0.8), 1e6),
        ("sep10_1d", separable(rng, 10, 1, 0.5), 1e6),
        ("ovl25_2d_C1", overlapping(rng, 25, 2, 0.8), 1.0),
        ("ovl25_2d_C10", overlapping(rng, 25, 2, 0.5), 10.0),
        ("ovl12_1d_C05", overlapping(rng, 12, 1, 0.7), 0.5),
    ]:
        fixtures.append({"name": name, "C": C, "X": X, "y": [int(v) for v in y],
                         "separable": name.startswith("sep")})
    out = Path(__file__).with_name("svm_fixtures.json")
    out.write_text(json.dumps(fixtures, indent=1) + "\n")


if __name__ == "__main__":
    main()
