"""From a raw detector grid to a handful of boxes."""

from pathlib import Path

from smartbin.detection import decode, iou, load_raw, nms

FIXTURE = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "e2e" / "item_00.json"

raw = load_raw(FIXTURE)
print(f"grid {raw.grid_size}x{raw.grid_size}, {len(raw.anchors)} anchors, input {raw.input_size}px")

# Every (cell, anchor) slot yields a candidate, most of them with negligible confidence.
candidates = decode(raw)
print(len(candidates), "candidates;", sum(d.confidence > 0.01 for d in candidates), "above 1% confidence")

for d in sorted(candidates, key=lambda d: -d.confidence)[:3]:
    print("  cat", d.category_id, "conf", round(d.confidence, 3), "box", tuple(round(v, 3) for v in d.box))

# The two strongest boxes overlap heavily and share a category, so NMS keeps one.
top = sorted(candidates, key=lambda d: -d.confidence)[:2]
print("IoU of the two strongest:", round(iou(top[0].box, top[1].box), 3))

kept = nms(candidates, iou_threshold=0.45, conf_threshold=0.25)
print("after NMS:")
for d in kept:
    print("  cat", d.category_id, "conf", round(d.confidence, 3))
