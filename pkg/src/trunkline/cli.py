"""Command-line surface for the trunk-curve toolkit.

Subcommands: fit-gt, loss, optimize, measure, synth, eval, report. All accept
``--format table|csv`` for machine-readable output. Exit codes: 0 on success,
1 on validation/parse errors, 2 when any measurement is rejected.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .bezier import BezierCurve, BoundingBox, control_bbox, sample, uniform_params
from .errors import MeasurementRejectedError, TrunklineError
from .fitting import AnnotationPolyline, fit_curve
from .formats import (
    AnnotationRecord,
    CurveRecord,
    parse_annotations,
    parse_curves,
    parse_depth,
    parse_intrinsics,
    write_annotations,
    write_curves,
    write_depth,
    write_intrinsics,
)
from .losses import LossWeights, WingParams, combined_loss, endpoint_loss, sampling_loss
from .measure import MeasureConfig, RepairConfig, measure
from .metrics import (
    CurveEvalConfig,
    GroundTruthCurve,
    ScoredCurve,
    curve_map,
    error_stats,
    oks,
    pck,
    render_report,
)
from .optimize import OptimConfig, fit_to_target
from .synth import NoiseConfig, SceneConfig, gen_scene, perturb_depth

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 2


def _emit(headers: list[str], rows: list[list], fmt: str) -> None:
    if fmt == "csv":
        writer = csv.writer(sys.stdout)
        writer.writerow(headers)
        writer.writerows(rows)
        return
    cells = [headers] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    for r in cells:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())


def _curve_of(record: CurveRecord) -> BezierCurve:
    return BezierCurve(record.control_points)


def _cmd_fit_gt(args) -> int:
    records = parse_annotations(args.annotations)
    out_records = []
    rows = []
    for rec in records:
        result = fit_curve(AnnotationPolyline(rec.keypoints), args.degree, args.param)
        out_records.append(
            CurveRecord(
                image_id=rec.image_id,
                control_points=result.curve.control_points,
                bbox=rec.bbox,
                residual_rms=result.residual_rms,
                parameterization=result.parameterization,
            )
        )
        rows.append([rec.image_id, f"{result.residual_rms:.6g}"])
    write_curves(out_records, args.out)
    _emit(["image_id", "residual_rms_px"], rows, args.format)
    return EXIT_OK


def _cmd_loss(args) -> int:
    preds = parse_curves(args.pred)
    gts = parse_curves(args.gt)
    gt_queue: dict[str, list[CurveRecord]] = {}
    for g in gts:
        gt_queue.setdefault(g.image_id, []).append(g)
    params = uniform_params(args.samples)
    wing_params = WingParams(w=args.w, epsilon=args.eps)
    weights = LossWeights(lambda_det=0.0, lambda_tsl=args.lambda_tsl, lambda_epl=args.lambda_epl)
    rows = []
    totals = []
    for p in preds:
        queue = gt_queue.get(p.image_id, [])
        if not queue:
            raise TrunklineError(f"no ground-truth record for image_id {p.image_id!r}")
        g = queue.pop(0)
        tsl = sampling_loss(_curve_of(p), _curve_of(g), params)
        epl = endpoint_loss(_curve_of(p), _curve_of(g), wing_params)
        breakdown = combined_loss(0.0, tsl, epl, weights)
        totals.append(breakdown.total)
        rows.append([p.image_id, f"{tsl:.6g}", f"{epl:.6g}", f"{breakdown.total:.6g}"])
    if totals:
        rows.append(["(mean)", "", "", f"{np.mean(totals):.6g}"])
    _emit(["image_id", "tsl_px", "epl", "total"], rows, args.format)
    return EXIT_OK


def _cmd_optimize(args) -> int:
    records = parse_curves(args.target)
    config = OptimConfig(
        max_iters=args.max_iters,
        step_size=args.step,
        momentum=args.momentum,
    )
    rows = []
    fitted = []
    for rec in records:
        curve, trace = fit_to_target(_curve_of(rec), config=config)
        fitted.append(
            CurveRecord(image_id=rec.image_id, control_points=curve.control_points, bbox=rec.bbox)
        )
        rows.append(
            [
                rec.image_id,
                trace.iterations,
                trace.converged,
                f"{trace.final.tsl:.6g}",
                f"{trace.final.epl:.6g}",
                f"{trace.final.total:.6g}",
            ]
        )
    if args.out:
        write_curves(fitted, args.out)
    _emit(["image_id", "iterations", "converged", "tsl_px", "epl", "total"], rows, args.format)
    return EXIT_OK


def _cmd_measure(args) -> int:
    records = parse_curves(args.pred)
    depth_map = parse_depth(args.depth)
    K = parse_intrinsics(args.intrinsics)
    config = MeasureConfig(
        samples=args.samples,
        repair=RepairConfig(enabled=not args.no_repair),
    )
    rows = []
    any_rejected = False
    for rec in records:
        try:
            result = measure(_curve_of(rec), depth_map, K, config)
        except MeasurementRejectedError as exc:
            any_rejected = True
            frac = "" if exc.valid_fraction is None else f"{exc.valid_fraction:.3f}"
            rows.append([rec.image_id, "", frac, "", "rejected"])
            continue
        rows.append(
            [
                rec.image_id,
                f"{result.length * 100.0:.2f}",
                f"{result.samples.valid_fraction:.3f}",
                result.samples.repaired_count,
                result.quality,
            ]
        )
    _emit(["image_id", "length_cm", "valid_fraction", "repaired", "quality"], rows, args.format)
    return EXIT_REJECTED if any_rejected else EXIT_OK


def _cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    depth_dir = out_dir / "depth"
    depth_dir.mkdir(parents=True, exist_ok=True)
    config = SceneConfig()
    annotations = []
    gt_curves = []
    rows = []
    keypoint_params = uniform_params(5)
    with open(out_dir / "oracle.jsonl", "w", encoding="utf-8") as oracle_fh:
        for i in range(args.count):
            scene_seed = args.seed + i
            scene = gen_scene(scene_seed, config)
            image_id = f"scene_{scene_seed:06d}"
            depth_map = scene.depth
            if args.noise_sigma > 0 or args.dropout > 0:
                depth_map = perturb_depth(
                    depth_map,
                    NoiseConfig(
                        gaussian_sigma_rel=args.noise_sigma,
                        dropout_fraction=args.dropout,
                        blob_dropout=args.blob_dropout,
                        seed=scene_seed + 1_000_003,
                    ),
                )
            write_depth(depth_map, depth_dir / f"{image_id}.pfm")
            box = control_bbox(scene.curve2d)
            bbox = (box.x_min - 1.0, box.y_min - 1.0, box.x_max + 1.0, box.y_max + 1.0)
            annotations.append(
                AnnotationRecord(
                    image_id=image_id,
                    bbox=bbox,
                    keypoints=sample(scene.curve2d, keypoint_params),
                )
            )
            gt_curves.append(
                CurveRecord(
                    image_id=image_id,
                    control_points=scene.curve2d.control_points,
                    confidence=1.0,
                    bbox=bbox,
                )
            )
            oracle_fh.write(
                json.dumps({"image_id": image_id, "length_m": scene.oracle_length}) + "\n"
            )
            rows.append([image_id, f"{scene.oracle_length * 100.0:.2f}"])
    write_annotations(annotations, out_dir / "annotations.jsonl")
    write_curves(gt_curves, out_dir / "gt_curves.jsonl")
    write_intrinsics(config.intrinsics(), out_dir / "intrinsics.txt")
    _emit(["image_id", "oracle_length_cm"], rows, args.format)
    return EXIT_OK


def _gt_bbox(record: CurveRecord) -> BoundingBox:
    if record.bbox is not None:
        x1, y1, x2, y2 = record.bbox
        return BoundingBox(x1, y1, x2, y2)
    return control_bbox(_curve_of(record))


def _cmd_eval(args) -> int:
    preds = parse_curves(args.pred)
    gts = parse_curves(args.gt)
    config = CurveEvalConfig(
        sample_count=args.samples,
        pck_threshold=args.pck_threshold,
        oks_sigma=args.oks_sigma,
    )
    gt_queue: dict[str, list[CurveRecord]] = {}
    for g in gts:
        gt_queue.setdefault(g.image_id, []).append(g)
    pcks = []
    okss = []
    for p in preds:
        queue = gt_queue.get(p.image_id)
        if not queue:
            continue
        g = queue.pop(0)
        box = _gt_bbox(g)
        pcks.append(pck(_curve_of(p), _curve_of(g), box.diagonal, config))
        okss.append(oks(_curve_of(p), _curve_of(g), box.area, config))
    scored = [
        ScoredCurve(
            image_id=p.image_id,
            confidence=1.0 if p.confidence is None else p.confidence,
            curve=_curve_of(p),
        )
        for p in preds
    ]
    truth = [
        GroundTruthCurve(image_id=g.image_id, curve=_curve_of(g), bbox=_gt_bbox(g)) for g in gts
    ]
    map50, map50_95 = curve_map(scored, truth, config)
    rows = [
        ["mean_pck", f"{np.mean(pcks):.6g}" if pcks else "nan"],
        ["mean_oks", f"{np.mean(okss):.6g}" if okss else "nan"],
        ["mAP50", f"{map50:.6g}"],
        ["mAP50_95", f"{map50_95:.6g}"],
    ]
    _emit(["metric", "value"], rows, args.format)
    return EXIT_OK


def _cmd_report(args) -> int:
    values = []
    with open(args.errors, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise TrunklineError(f"{args.errors}:{lineno}: not a number: {text!r}")
    stats = error_stats(values)
    plot_path, table_path = render_report(stats, args.out)
    rows = [
        ["count", stats.count],
        ["mean", f"{stats.mean:.6g}"],
        ["std", f"{stats.std:.6g}"],
        ["plot", str(plot_path)],
        ["table", str(table_path)],
    ]
    _emit(["field", "value"], rows, args.format)
    return EXIT_OK


def _add_format(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("table", "csv"), default="table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trunkline",
        description="Bezier trunk-curve fitting, losses, and 3D length measurement.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-gt", help="fit ground-truth curves to keypoint annotations")
    p.add_argument("--annotations", required=True)
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--param", choices=("uniform", "chord"), default="uniform")
    p.add_argument("--out", required=True)
    _add_format(p)
    p.set_defaults(func=_cmd_fit_gt)

    p = sub.add_parser("loss", help="evaluate curve losses between prediction and ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--w", type=float, default=10.0)
    p.add_argument("--eps", type=float, default=2.0)
    p.add_argument("--lambda-tsl", type=float, default=1.0, dest="lambda_tsl")
    p.add_argument("--lambda-epl", type=float, default=0.1, dest="lambda_epl")
    _add_format(p)
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("optimize", help="fit curves to targets by gradient descent")
    p.add_argument("--target", required=True)
    p.add_argument("--max-iters", type=int, default=5000, dest="max_iters")
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--out")
    _add_format(p)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("measure", help="measure 3D trunk lengths through a depth map")
    p.add_argument("--pred", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--no-repair", action="store_true", dest="no_repair")
    _add_format(p)
    p.set_defaults(func=_cmd_measure)

    p = sub.add_parser("synth", help="generate synthetic scenes with oracle lengths")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--noise-sigma", type=float, default=0.02, dest="noise_sigma")
    p.add_argument("--dropout", type=float, default=0.05)
    p.add_argument("--blob-dropout", action="store_true", dest="blob_dropout")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_format(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("eval", help="curve alignment metrics (PCK, OKS mAP)")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--pck-threshold", type=float, default=0.2, dest="pck_threshold")
    p.add_argument("--oks-sigma", type=float, default=0.05, dest="oks_sigma")
    _add_format(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="error statistics and distribution plots")
    p.add_argument("--errors", required=True)
    p.add_argument("--out", required=True)
    _add_format(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MeasurementRejectedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except TrunklineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
