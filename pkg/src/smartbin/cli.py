"""``smartbin`` command line: file-in, file-out access to every pipeline stage.

Exit codes: 0 success, 2 input or validation error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import bin_controller, compost, dataset_io, detection, metrics, svm

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3


class InvariantError(RuntimeError):
    """A post-condition of a pipeline stage did not hold."""


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _read_json(path: str):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def cmd_split(args) -> int:
    names = dataset_io.read_category_names(args.categories) if args.categories else dataset_io.CATEGORY_NAMES
    manifest = dataset_io.load_manifest(args.manifest, names)
    result = dataset_io.split_dataset(manifest, args.fraction, args.seed)
    if len(result.train_ids) + len(result.test_ids) != len(manifest):
        raise InvariantError("split lost or duplicated images")
    _write(args.out, result.to_json())
    print(f"train {len(result.train_ids)} / test {len(result.test_ids)} (seed {result.seed})", file=sys.stderr)
    return EXIT_OK


def _kernel_from_args(args) -> svm.KernelSpec:
    if args.kernel == "linear":
        return svm.KernelSpec.linear()
    if args.kernel == "polynomial":
        return svm.KernelSpec.polynomial(args.degree, args.coef0)
    return svm.KernelSpec.rbf(args.gamma)


def _load_examples(path: str) -> list[svm.LabeledExample]:
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise ValueError(f"{path}: expected a JSON array of {{x, y}} objects")
    return [svm.LabeledExample(tuple(item["x"]), int(item["y"])) for item in doc]


def cmd_train_svm(args) -> int:
    data = _load_examples(args.data)
    config = svm.TrainConfig(solver=args.solver, seed=args.seed, max_epochs=args.max_epochs)
    model = svm.train(data, _kernel_from_args(args), args.C, config)
    svm.save_model(model, args.out)
    correct = int(round(svm.accuracy(model, data) * len(data)))
    print(f"training accuracy: {correct}/{len(data)}")
    print(f"objective: {model.diagnostics.objective:.6g} after {model.diagnostics.iterations} iterations")
    if model.w is not None:
        print(f"w = {model.w.tolist()}  b = {model.b:.6g}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = svm.load_model(args.model)
    vectors = _read_json(args.vectors)
    labels = [svm.predict(model, v) for v in vectors]
    _write(args.out, json.dumps(labels) + "\n")
    return EXIT_OK


def cmd_decode(args) -> int:
    raw = detection.load_raw(args.raw)
    dets = detection.decode(raw)
    if len(dets) != raw.grid_size ** 2 * len(raw.anchors):
        raise InvariantError("decode produced the wrong number of detections")
    if args.nms:
        dets = detection.nms(dets, args.iou_threshold, args.conf_threshold)
    image_id = args.image_id or Path(args.raw).stem
    doc = [{"image_id": image_id, "detections": [d.to_dict() for d in dets]}]
    _write(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_nms(args) -> int:
    images = detection.read_detections(args.detections)
    kept = [(image_id, detection.nms(dets, args.iou_threshold, args.conf_threshold)) for image_id, dets in images]
    doc = [{"image_id": i, "detections": [d.to_dict() for d in dets]} for i, dets in kept]
    _write(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def _snapshot_paths(args) -> list[Path]:
    paths = [Path(p) for p in args.snapshots or []]
    if args.snapshot_dir:
        paths += sorted(Path(args.snapshot_dir).glob("*.json"))
    if not paths:
        raise ValueError("no snapshot files given")
    return paths


def cmd_eval_map(args) -> int:
    manifest = dataset_io.load_manifest(args.manifest)
    gts_by_id = manifest.boxes()
    image_ids = manifest.image_ids
    snapshots = []
    for path in _snapshot_paths(args):
        doc = _read_json(path)
        dets_by_id = {str(img["image_id"]): [detection.Detection.from_dict(d) for d in img["detections"]]
                      for img in doc["images"]}
        unknown = set(dets_by_id) - set(image_ids)
        if unknown:
            raise ValueError(f"{path}: detections for unknown images {sorted(unknown)}")
        dets, _ = metrics.align_by_image(image_ids, dets_by_id, gts_by_id)
        snapshots.append((int(doc["iteration"]), dets))
    snapshots.sort(key=lambda s: s[0])
    gts = [list(gts_by_id[i]) for i in image_ids]
    schedule = metrics.EvalSchedule(args.interval, args.max_batches, args.iou_threshold)
    points = metrics.eval_curve(snapshots, gts, schedule)
    if any(not 0.0 <= p.map_value <= 1.0 for p in points):
        raise InvariantError("mAP outside [0, 1]")
    _write(args.out, metrics.curve_to_csv(points))
    return EXIT_OK


def cmd_simulate_compost(args) -> int:
    preset = compost.load_preset(args.preset)
    cfg = preset.config
    if args.dt is not None:
        cfg = replace(cfg, dt_days=args.dt)
    final, series = compost.run_cycle(preset.feedstock, preset.compartment, cfg, days=args.days)
    balance = final.dry_mass_kg + final.degraded_mass_kg
    if abs(balance - series[0].dry_mass_kg) > 1e-6 * series[0].dry_mass_kg:
        raise InvariantError("dry-mass balance does not close")
    if args.out:
        _write(args.out, compost.series_to_csv(series))
    print(compost.composition_report(final).format())
    return EXIT_OK


def cmd_run_bin(args) -> int:
    script = bin_controller.load_script(args.script, args.fixtures)
    model = svm.load_model(args.model) if args.model else None
    config = bin_controller.BinConfig(confidence_floor=args.confidence_floor, svm=model)
    trace = bin_controller.run_simulation(script, config)
    final = trace[-1].state
    dumped = sum(final.compartment_counts)
    in_flight = int(final.pending_item is not None)
    if final.items_seen != dumped + final.abandoned + in_flight:
        raise InvariantError("item accounting does not balance")
    _write(args.out, bin_controller.trace_to_jsonl(trace))
    bio, nonbio = final.compartment_counts
    print(f"final phase {final.phase.value}; counts bio={bio} nonbio={nonbio}; "
          f"transfers={final.transfers}; abandoned={final.abandoned}", file=sys.stderr)
    return EXIT_OK


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1)")
    return v


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return v


def _unit(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _nonneg(text: str) -> float:
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"{text} is negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smartbin", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("split-dataset", help="seeded train/test split of a label manifest")
    s.add_argument("--manifest", required=True, help="JSON array of {image_id, label_path}")
    s.add_argument("--categories", help="category names file, one per line")
    s.add_argument("--fraction", type=_fraction, default=0.9)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="split JSON (default: stdout)")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train-svm", help="train the margin classifier")
    s.add_argument("--data", required=True, help="JSON array of {x: [...], y: +1|-1}")
    s.add_argument("--kernel", choices=svm.KERNEL_KINDS, default="linear")
    s.add_argument("--C", type=_positive, default=1.0)
    s.add_argument("--gamma", type=_positive, default=1.0)
    s.add_argument("--degree", type=_positive_int, default=3)
    s.add_argument("--coef0", type=float, default=1.0)
    s.add_argument("--solver", choices=("smo", "sgd"), default="smo")
    s.add_argument("--max-epochs", type=_positive_int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="model JSON")
    s.set_defaults(func=cmd_train_svm)

    s = sub.add_parser("predict", help="label feature vectors with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--vectors", required=True, help="JSON array of feature vectors")
    s.add_argument("--out")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("decode", help="decode a raw YOLO grid fixture into detections")
    s.add_argument("--raw", required=True)
    s.add_argument("--image-id")
    s.add_argument("--nms", action="store_true", help="also apply confidence filtering and NMS")
    s.add_argument("--iou-threshold", type=_fraction, default=detection.DEFAULT_IOU_THRESHOLD)
    s.add_argument("--conf-threshold", type=_unit, default=detection.DEFAULT_CONF_THRESHOLD)
    s.add_argument("--out")
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("nms", help="confidence filtering and per-category NMS")
    s.add_argument("--detections", required=True)
    s.add_argument("--iou-threshold", type=_fraction, default=detection.DEFAULT_IOU_THRESHOLD)
    s.add_argument("--conf-threshold", type=_unit, default=detection.DEFAULT_CONF_THRESHOLD)
    s.add_argument("--out")
    s.set_defaults(func=cmd_nms)

    s = sub.add_parser("eval-map", help="mAP-vs-iteration curve from detection snapshots")
    s.add_argument("--manifest", required=True, help="ground-truth label manifest")
    s.add_argument("--snapshots", nargs="*", help="snapshot JSON files {iteration, images: [...]}")
    s.add_argument("--snapshot-dir", help="directory of snapshot JSON files")
    s.add_argument("--interval", type=_positive_int, default=metrics.DEFAULT_INTERVAL)
    s.add_argument("--max-batches", type=_positive_int, default=metrics.DEFAULT_MAX_BATCHES)
    s.add_argument("--iou-threshold", type=_fraction, default=metrics.DEFAULT_MATCH_IOU)
    s.add_argument("--out", help="curve CSV (default: stdout)")
    s.set_defaults(func=cmd_eval_map)

    s = sub.add_parser("simulate-compost", help="run the thermophilic compost simulation")
    s.add_argument("--preset", default="paper-default", help="preset name or JSON path")
    s.add_argument("--days", type=_nonneg, default=14.0)
    s.add_argument("--dt", type=_positive, help="integration step in days (<= 0.25)")
    s.add_argument("--out", help="time-series CSV")
    s.set_defaults(func=cmd_simulate_compost)

    s = sub.add_parser("run-bin", help="replay an event script through the bin controller")
    s.add_argument("--script", required=True, help="JSON array of {t_ms, event, payload}")
    s.add_argument("--model", help="SVM model JSON for the classifier fallback")
    s.add_argument("--fixtures", help="directory that raw-grid payloads are resolved against")
    s.add_argument("--confidence-floor", type=_unit, default=0.5)
    s.add_argument("--out", help="trace JSON lines (default: stdout)")
    s.set_defaults(func=cmd_run_bin)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"smartbin: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"smartbin {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
