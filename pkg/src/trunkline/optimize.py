"""Direct control-point fitting by momentum subgradient descent on the curve losses.

The objective is the curve part of the combined loss, lambda_tsl * sampling
loss + lambda_epl * endpoint loss, minimized over the predicted control
points. The objective is piecewise linear near its minimum, so fixed-step
subgradient iterations do not settle: they orbit the minimizer. The optimizer
therefore tracks the best iterate seen and returns it, which is the standard
guarantee for subgradient methods. ``loss_history`` records one entry per
evaluated iterate followed by a terminal entry for the returned curve, so the
trace's final breakdown always equals the last history entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bezier import BezierCurve, ParamSet, bernstein_basis, uniform_params
from .errors import DomainError, OptimizationDivergenceError
from .fitting import AnnotationPolyline, fit_curve
from .losses import (
    LossBreakdown,
    LossWeights,
    WingParams,
    _endpoint_grad_rows,
    _endpoint_loss_raw,
    _sampling_grad_raw,
    _sampling_loss_raw,
    combined_loss,
)

DIVERGENCE_LIMIT = 1e9
CONVERGENCE_STREAK = 10


def _default_weights() -> LossWeights:
    return LossWeights(lambda_det=0.0)


@dataclass(frozen=True, eq=False)
class OptimConfig:
    max_iters: int = 5000
    step_size: float = 0.5
    momentum: float = 0.9
    tol_loss_delta: float = 1e-8
    weights: LossWeights = field(default_factory=_default_weights)
    wing: WingParams = field(default_factory=WingParams)
    sampling: ParamSet = field(default_factory=lambda: uniform_params(50))

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be positive")
        if not (np.isfinite(self.step_size) and self.step_size > 0):
            raise DomainError("step_size must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise DomainError("momentum must lie in [0, 1)")
        if not (np.isfinite(self.tol_loss_delta) and self.tol_loss_delta > 0):
            raise DomainError("tol_loss_delta must be positive")
        if self.weights.lambda_det != 0.0:
            # The detection term has no gradient here; its weight is forced to zero.
            object.__setattr__(self, "weights", replace(self.weights, lambda_det=0.0))


@dataclass(frozen=True, eq=False)
class OptimTrace:
    iterations: int
    loss_history: np.ndarray
    final: LossBreakdown
    converged: bool


def default_init(target: BezierCurve) -> BezierCurve:
    """Control points spread uniformly along the segment joining the target endpoints."""
    first, last = target.endpoints
    lam = np.linspace(0.0, 1.0, target.degree + 1)[:, None]
    return BezierCurve(first * (1.0 - lam) + last * lam)


def fit_to_target(
    target: BezierCurve,
    init: BezierCurve | None = None,
    config: OptimConfig | None = None,
) -> tuple[BezierCurve, OptimTrace]:
    """Minimize the curve losses against a known target curve.

    Returns the best iterate and its trace. Raises
    :class:`OptimizationDivergenceError` if the loss explodes or turns
    non-finite; the partial trace rides on the exception.
    """
    config = config or OptimConfig()
    if init is None:
        init = default_init(target)
    if init.degree != target.degree:
        raise DomainError("init must have the same degree as the target")

    basis = bernstein_basis(config.sampling, target.degree)
    # evaluate both curves through the same basis so identical control points
    # give an exactly zero objective
    gt_samples = basis @ target.control_points
    gt_ends = target.endpoints
    l_tsl = config.weights.lambda_tsl
    l_epl = config.weights.lambda_epl

    def breakdown(points: np.ndarray) -> LossBreakdown:
        tsl = _sampling_loss_raw(basis @ points, gt_samples)
        epl = _endpoint_loss_raw(points[[0, -1]], gt_ends, config.wing)
        return combined_loss(0.0, tsl, epl, config.weights)

    def gradient(points: np.ndarray) -> np.ndarray:
        grad = l_tsl * _sampling_grad_raw(basis @ points, gt_samples, basis)
        if l_epl != 0.0:
            rows = _endpoint_grad_rows(points[[0, -1]], gt_ends, config.wing)
            grad[0] += l_epl * rows[0]
            grad[-1] += l_epl * rows[1]
        return grad

    points = np.array(init.control_points, dtype=float)
    velocity = np.zeros_like(points)
    history: list[float] = []
    best_points = points.copy()
    best = breakdown(points)
    converged = False
    iterations = 0
    streak = 0

    for it in range(config.max_iters + 1):
        bd = breakdown(points)
        history.append(bd.total)
        if not np.isfinite(bd.total) or bd.total > DIVERGENCE_LIMIT:
            trace = OptimTrace(it, np.asarray(history), bd, False)
            raise OptimizationDivergenceError(
                f"loss diverged to {bd.total!r} at iteration {it}", trace=trace
            )
        if bd.total < best.total:
            best, best_points = bd, points.copy()
        if bd.total == 0.0:
            converged, iterations = True, it
            break
        if it > 0 and abs(history[-1] - history[-2]) < config.tol_loss_delta:
            streak += 1
            if streak >= CONVERGENCE_STREAK:
                converged, iterations = True, it
                break
        else:
            streak = 0
        if it == config.max_iters:
            iterations = it
            break
        velocity = config.momentum * velocity - config.step_size * gradient(points)
        points = points + velocity

    if best.total < history[-1]:
        history.append(best.total)
    trace = OptimTrace(
        iterations=iterations,
        loss_history=np.asarray(history),
        final=best,
        converged=converged,
    )
    return BezierCurve(best_points), trace


def fit_to_polyline(
    target_points: AnnotationPolyline,
    degree: int = 4,
    config: OptimConfig | None = None,
) -> tuple[BezierCurve, OptimTrace]:
    """Least-squares fit of the polyline, then loss-based refinement.

    The refinement starts at the least-squares curve and optimizes against it,
    so it can only improve on that solution under the loss objective; the
    trace reports the refined curve's losses relative to the fitted curve.
    """
    fitted = fit_curve(target_points, degree=degree, parameterization="uniform")
    return fit_to_target(fitted.curve, init=fitted.curve, config=config)
