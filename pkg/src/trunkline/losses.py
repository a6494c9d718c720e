"""Curve regression losses and their analytic gradients.

Three ingredients: the sampling loss (mean 2-D L1 distance between
corresponding uniformly sampled curve points), the wing loss (log-shaped near
zero, linear in the tails), and the endpoint loss (wing loss applied to the
Euclidean deviations of the two curve endpoints). A weighted combination with
an externally supplied detection term forms the training objective.

Gradients are subgradients of the piecewise-smooth objectives: sign(0) is
taken as 0 and the endpoint gradient at zero deviation is the zero vector, so
exact minima have exactly zero gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bezier import BezierCurve, ParamSet, bernstein_basis, sample, uniform_params
from .errors import DomainError

DEFAULT_SAMPLE_COUNT = 50


@dataclass(frozen=True)
class WingParams:
    """Wing loss shape: ``w`` bounds the non-linear range, ``epsilon`` its curvature."""

    w: float = 10.0
    epsilon: float = 2.0

    def __post_init__(self):
        if not (np.isfinite(self.w) and self.w > 0):
            raise DomainError("wing parameter w must be positive and finite")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise DomainError("wing parameter epsilon must be positive and finite")

    @property
    def linear_offset(self) -> float:
        """Constant C = w - w*ln(1 + w/epsilon) joining the two branches continuously."""
        return self.w - self.w * math.log(1.0 + self.w / self.epsilon)


@dataclass(frozen=True)
class LossWeights:
    lambda_det: float = 1.0
    lambda_tsl: float = 1.0
    lambda_epl: float = 0.1

    def __post_init__(self):
        vals = (self.lambda_det, self.lambda_tsl, self.lambda_epl)
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise DomainError("loss weights must be finite and nonnegative")


@dataclass(frozen=True)
class LossBreakdown:
    """One evaluation of the combined objective; ``det`` is externally supplied."""

    det: float
    tsl: float
    epl: float
    total: float


def _as_default_params(params: ParamSet | None) -> ParamSet:
    if params is None:
        return uniform_params(DEFAULT_SAMPLE_COUNT)
    if params.count < 2:
        raise DomainError("sampling losses need at least 2 parameters")
    return params


def _sampling_loss_raw(pred_samples: np.ndarray, gt_samples: np.ndarray) -> float:
    return float(np.abs(pred_samples - gt_samples).sum(axis=1).mean())


def _sampling_grad_raw(pred_samples, gt_samples, basis) -> np.ndarray:
    signs = np.sign(pred_samples - gt_samples)
    return basis.T @ signs / basis.shape[0]


def sampling_loss(pred: BezierCurve, gt: BezierCurve, params: ParamSet | None = None) -> float:
    """Mean L1 distance |dx|+|dy| between corresponding sampled curve points."""
    params = _as_default_params(params)
    return _sampling_loss_raw(sample(pred, params), sample(gt, params))


def sampling_loss_grad(pred: BezierCurve, gt: BezierCurve, params: ParamSet | None = None) -> np.ndarray:
    """Subgradient of the sampling loss over predicted control points, shape (n+1, 2)."""
    params = _as_default_params(params)
    basis = bernstein_basis(params, pred.degree)
    return _sampling_grad_raw(sample(pred, params), sample(gt, params), basis)


def wing(x, params: WingParams = WingParams()):
    """Wing loss: w*ln(1+|x|/eps) inside (-w, w), |x| - C outside; even, continuous."""
    ax = np.abs(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(ax)):
        raise DomainError("wing input must be finite")
    out = np.where(
        ax < params.w,
        params.w * np.log1p(ax / params.epsilon),
        ax - params.linear_offset,
    )
    return float(out) if out.ndim == 0 else out


def wing_slope(distance: float, params: WingParams = WingParams()) -> float:
    """d wing / d x at x = distance >= 0: w/(eps+x) on the log branch, 1 beyond."""
    if distance < params.w:
        return params.w / (params.epsilon + distance)
    return 1.0


def _endpoint_loss_raw(pred_ends: np.ndarray, gt_ends: np.ndarray, params: WingParams) -> float:
    dists = np.linalg.norm(pred_ends - gt_ends, axis=1)
    return float(np.sum(wing(dists, params)))


def _endpoint_grad_rows(pred_ends, gt_ends, params: WingParams) -> np.ndarray:
    """Gradient rows for the first and last control points, shape (2, 2)."""
    rows = np.zeros((2, 2))
    for k in range(2):
        delta = pred_ends[k] - gt_ends[k]
        dist = float(np.hypot(delta[0], delta[1]))
        if dist > 0.0:
            rows[k] = wing_slope(dist, params) * delta / dist
    return rows


def endpoint_loss(pred: BezierCurve, gt: BezierCurve, params: WingParams = WingParams()) -> float:
    """Wing loss summed over the Euclidean deviations of the two endpoints."""
    if pred.degree != gt.degree:
        raise DomainError("endpoint loss requires curves of equal degree")
    return _endpoint_loss_raw(pred.endpoints, gt.endpoints, params)


def endpoint_loss_grad(pred: BezierCurve, gt: BezierCurve, params: WingParams = WingParams()) -> np.ndarray:
    """Subgradient of the endpoint loss; nonzero only in the first and last rows."""
    if pred.degree != gt.degree:
        raise DomainError("endpoint loss requires curves of equal degree")
    grad = np.zeros((pred.degree + 1, 2))
    rows = _endpoint_grad_rows(pred.endpoints, gt.endpoints, params)
    grad[0] = rows[0]
    grad[-1] = rows[1]
    return grad


def combined_loss(det: float, tsl: float, epl: float, weights: LossWeights = LossWeights()) -> LossBreakdown:
    """Weighted total: lambda_det*det + lambda_tsl*tsl + lambda_epl*epl."""
    for name, value in (("det", det), ("tsl", tsl), ("epl", epl)):
        if not np.isfinite(value):
            raise DomainError(f"loss component {name} must be finite")
    if tsl < 0 or epl < 0:
        raise DomainError("tsl and epl must be nonnegative")
    total = weights.lambda_det * det + weights.lambda_tsl * tsl + weights.lambda_epl * epl
    return LossBreakdown(det=det, tsl=tsl, epl=epl, total=total)
