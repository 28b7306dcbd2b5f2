"""Score simulated training snapshots and print the mAP-by-iteration curve.

Detections get better as "training" proceeds: early snapshots have jittered
boxes and spurious hits, late ones are close to the ground truth.
"""

import numpy as np

from smartbin.dataset_io import GroundTruthBox
from smartbin.detection import Detection
from smartbin.metrics import curve_to_csv, eval_curve

rng = np.random.default_rng(3)
gts = []
for _ in range(20):
    boxes = []
    for _ in range(rng.integers(1, 4)):
        w, h = rng.uniform(0.1, 0.3, size=2)
        cx, cy = rng.uniform(0.2, 0.8, size=2)
        boxes.append(GroundTruthBox(int(rng.integers(2)), cx, cy, w, h))
    gts.append(boxes)


def snapshot(progress):
    """Detections for every image at a given training progress in [0, 1]."""
    images = []
    for boxes in gts:
        dets = []
        for g in boxes:
            jitter = (1 - progress) * 0.12 * rng.normal(size=2)
            cat = g.category_id if rng.random() < 0.5 + 0.5 * progress else 1 - g.category_id
            dets.append(Detection((g.cx + jitter[0], g.cy + jitter[1], g.w, g.h), cat,
                                  float(np.clip(0.4 + 0.5 * progress + 0.1 * rng.normal(), 0, 1))))
        if rng.random() > progress:
            dets.append(Detection(tuple(rng.uniform(0.2, 0.8, size=2)) + (0.1, 0.1),
                                  int(rng.integers(2)), float(rng.uniform(0.3, 0.9))))
        images.append(dets)
    return images


snapshots = [(it, snapshot(it / 2500)) for it in range(100, 2501, 100)]
curve = eval_curve(snapshots, gts)

for p in curve[::4]:
    print(f"iteration {p.iteration:5d}  mAP {p.map_value:.3f}  " + "#" * int(40 * p.map_value))

print()
print(curve_to_csv(curve[:3]), end="")
print("...")
