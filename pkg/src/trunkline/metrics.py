"""Curve-alignment metrics (PCK, OKS-based mAP over on-curve samples),
length-error measures, and error-distribution statistics with report output.

Evaluation is orientation-invariant by default: trunks have no canonical
head-to-tail direction, so each predicted curve is compared in both traversal
orders and the better one counts. PCK/OKS constants are configuration with
documented defaults, not universal standards for curve samples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .bezier import BezierCurve, BoundingBox, sample, uniform_params
from .errors import DomainError

DEFAULT_OKS_THRESHOLDS = (0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95)
CUMULATIVE_THRESHOLDS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50)
_SVG_HASHSALT = "trunkline-report"


@dataclass(frozen=True)
class CurveEvalConfig:
    sample_count: int = 50
    pck_threshold: float = 0.2  # fraction of the bbox diagonal
    oks_sigma: float = 0.05
    oks_thresholds: tuple = DEFAULT_OKS_THRESHOLDS
    orientation_invariant: bool = True

    def __post_init__(self):
        if self.sample_count < 2:
            raise DomainError("sample_count must be >= 2")
        for t in (self.pck_threshold, self.oks_sigma, *self.oks_thresholds):
            if not 0.0 < t <= 1.0:
                raise DomainError("thresholds must lie in (0, 1]")


@dataclass(frozen=True)
class ScoredCurve:
    image_id: str
    confidence: float
    curve: BezierCurve
    bbox: BoundingBox | None = None


@dataclass(frozen=True)
class GroundTruthCurve:
    image_id: str
    curve: BezierCurve
    bbox: BoundingBox


def _pair_distances(pred: BezierCurve, gt: BezierCurve, config: CurveEvalConfig) -> np.ndarray:
    """Pointwise distances for both pred orientations, shape (1 or 2, sample_count)."""
    params = uniform_params(config.sample_count)
    ps = sample(pred, params)
    gs = sample(gt, params)
    rows = [np.linalg.norm(ps - gs, axis=1)]
    if config.orientation_invariant:
        rows.append(np.linalg.norm(ps[::-1] - gs, axis=1))
    return np.stack(rows)


def pck(
    pred: BezierCurve,
    gt: BezierCurve,
    bbox_diag: float,
    config: CurveEvalConfig = CurveEvalConfig(),
) -> float:
    """Fraction of corresponding on-curve samples within pck_threshold * bbox_diag."""
    if bbox_diag <= 0:
        raise DomainError("bbox diagonal must be positive")
    dists = _pair_distances(pred, gt, config)
    fractions = (dists < config.pck_threshold * bbox_diag).mean(axis=1)
    return float(fractions.max())


def oks(
    pred: BezierCurve,
    gt: BezierCurve,
    bbox_area: float,
    config: CurveEvalConfig = CurveEvalConfig(),
) -> float:
    """Mean exp(-d^2 / (2 * bbox_area * sigma^2)) over corresponding samples."""
    if bbox_area <= 0:
        raise DomainError("bbox area must be positive")
    dists = _pair_distances(pred, gt, config)
    sims = np.exp(-(dists**2) / (2.0 * bbox_area * config.oks_sigma**2)).mean(axis=1)
    return float(sims.max())


def _average_precision(tp_flags: np.ndarray, n_gt: int) -> float:
    """All-point interpolated AP from confidence-ordered true-positive flags."""
    if n_gt == 0:
        raise DomainError("average precision undefined without ground truth")
    if tp_flags.size == 0:
        return 0.0
    tp_cum = np.cumsum(tp_flags)
    precision = tp_cum / np.arange(1, tp_flags.size + 1)
    recall = tp_cum / n_gt
    # precision envelope, then sum increments of recall
    env = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = 0.0
    ap = 0.0
    for p, r in zip(env, recall):
        ap += (r - prev_r) * p
        prev_r = r
    return float(ap)


def curve_map(
    predictions: list[ScoredCurve],
    gts: list[GroundTruthCurve],
    config: CurveEvalConfig = CurveEvalConfig(),
) -> tuple[float, float]:
    """(mAP50, mAP50-95) by greedy confidence-ordered OKS matching per image."""
    if not gts:
        raise DomainError("curve mAP undefined on an empty ground-truth set")
    gts_by_image: dict[str, list[GroundTruthCurve]] = {}
    for g in gts:
        gts_by_image.setdefault(g.image_id, []).append(g)
    order = sorted(range(len(predictions)), key=lambda i: -predictions[i].confidence)

    # OKS between each prediction and every gt of its image, computed once
    oks_rows: list[np.ndarray] = [np.empty(0)] * len(predictions)
    for i, p in enumerate(predictions):
        cands = gts_by_image.get(p.image_id, [])
        oks_rows[i] = np.array(
            [oks(p.curve, g.curve, g.bbox.area, config) for g in cands], dtype=float
        )

    aps = []
    for threshold in config.oks_thresholds:
        matched: dict[str, set[int]] = {}
        tp_flags = np.zeros(len(order), dtype=bool)
        for rank, i in enumerate(order):
            p = predictions[i]
            used = matched.setdefault(p.image_id, set())
            row = oks_rows[i]
            best_j, best_val = -1, threshold
            for j, val in enumerate(row):
                if j in used or val < threshold:
                    continue
                if best_j < 0 or val > best_val:
                    best_j, best_val = j, val
            if best_j >= 0:
                used.add(best_j)
                tp_flags[rank] = True
        aps.append(_average_precision(tp_flags, len(gts)))

    ap_by_threshold = dict(zip(config.oks_thresholds, aps))
    map50 = ap_by_threshold.get(0.5, aps[0])
    return map50, float(np.mean(aps))


def rel_errors(measured: float, gt: float) -> tuple[float, float]:
    """Signed and absolute relative length errors, normalized by ground truth."""
    if gt <= 0:
        raise DomainError("ground-truth length must be positive")
    e_r = (measured - gt) / gt
    return e_r, abs(e_r)


@dataclass(frozen=True)
class ErrorStats:
    """Moments and cumulative absolute-error fractions of a batch of errors."""

    mean: float
    std: float
    gaussian_fit: tuple[float, float]
    cumulative: tuple[tuple[float, float], ...]
    count: int


def error_stats(errors) -> ErrorStats:
    arr = np.asarray(errors, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("error_stats needs a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise DomainError("errors must be finite")
    mean = float(arr.mean())
    std = float(arr.std())  # population std: moment matching for the Gaussian fit
    abs_err = np.abs(arr)
    thresholds = list(CUMULATIVE_THRESHOLDS)
    max_abs = float(abs_err.max())
    if max_abs > thresholds[-1]:
        thresholds.append(max_abs)
    cumulative = tuple((float(t), float((abs_err <= t).mean())) for t in thresholds)
    return ErrorStats(
        mean=mean,
        std=std,
        gaussian_fit=(mean, std),
        cumulative=cumulative,
        count=arr.size,
    )


def render_report(stats: ErrorStats, out_dir) -> tuple[Path, Path]:
    """Write an SVG plot and a CSV stats table; byte-deterministic per input.

    Returns (plot_path, table_path).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plot_path = out / "error_report.svg"
    table_path = out / "error_stats.csv"

    thresholds = [t for t, _ in stats.cumulative]
    fractions = [f for _, f in stats.cumulative]
    bin_heights = np.diff([0.0] + fractions)
    mu, sigma = stats.gaussian_fit

    fig = Figure(figsize=(9, 4))
    ax_hist, ax_cum = fig.subplots(1, 2)
    ax_hist.bar(range(len(thresholds)), bin_heights, width=0.9, color="#4878cf")
    ax_hist.set_xticks(range(len(thresholds)))
    ax_hist.set_xticklabels([f"{t:g}" for t in thresholds], rotation=45, fontsize=7)
    ax_hist.set_xlabel("absolute relative error bin (upper edge)")
    ax_hist.set_ylabel("fraction of samples")
    ax_hist.set_title(f"n={stats.count}, fit mean={mu:.4f}, fit std={sigma:.4f}", fontsize=9)
    ax_cum.plot(thresholds, fractions, marker="o", color="#d1022f")
    ax_cum.set_ylim(0.0, 1.05)
    ax_cum.set_xlabel("absolute relative error threshold")
    ax_cum.set_ylabel("cumulative fraction")
    ax_cum.set_title("cumulative distribution", fontsize=9)
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": _SVG_HASHSALT}):
        fig.savefig(plot_path, format="svg", metadata={"Date": None})

    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["count", "mean", "std", "gauss_mu", "gauss_sigma"]
        header += [f"cum@{t:g}" for t in thresholds]
        row = [stats.count, repr(stats.mean), repr(stats.std), repr(mu), repr(sigma)]
        row += [repr(f) for f in fractions]
        writer.writerow(header)
        writer.writerow(row)
    return plot_path, table_path
