"""Least-squares recovery of Bezier control points from ordered keypoint annotations.

Each annotation point is assigned a curve parameter (uniform by default,
chord-length optionally) and the control points solve the resulting linear
system in the least-squares sense. With degree+1 annotation points the system
is square and the fit interpolates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bezier import BezierCurve, ParamSet, bernstein_basis
from .errors import DegenerateInputError, DomainError, UnderdeterminedError

PARAMETERIZATIONS = ("uniform", "chord")


@dataclass(frozen=True, eq=False)
class AnnotationPolyline:
    """Ordered trunk keypoints, head to tail, shape (m+1, 2) in pixels."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise DomainError("annotation needs at least 2 finite 2-D points")
        if not np.all(np.isfinite(pts)):
            raise DomainError("annotation coordinates must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class FitResult:
    curve: BezierCurve
    residual_rms: float
    parameterization: str

    def __post_init__(self):
        if not (np.isfinite(self.residual_rms) and self.residual_rms >= 0):
            raise DomainError("residual must be finite and nonnegative")


def design_matrix(params: ParamSet, degree: int) -> np.ndarray:
    """Bernstein design matrix of shape (count, degree+1).

    Requires count >= degree+1 so the fit it feeds is not underdetermined.
    """
    if params.count < degree + 1:
        raise UnderdeterminedError(
            f"{params.count} parameters cannot determine a degree-{degree} curve"
        )
    return bernstein_basis(params, degree)


def chord_length_params(points: np.ndarray) -> ParamSet:
    """Normalized cumulative segment length of a polyline as curve parameters."""
    pts = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = seg.sum()
    if total <= 0.0 or np.any(seg == 0.0):
        raise DegenerateInputError(
            "chord-length parameterization needs strictly positive segment lengths"
        )
    return ParamSet(np.concatenate([[0.0], np.cumsum(seg) / total]))


def fit_curve(
    annotation: AnnotationPolyline,
    degree: int = 4,
    parameterization: str = "uniform",
) -> FitResult:
    """Least-squares Bezier fit of ordered annotation points.

    Annotation order defines curve orientation. The solve uses an orthogonal
    decomposition (numpy lstsq), not normal equations.
    """
    if parameterization not in PARAMETERIZATIONS:
        raise DomainError(f"unknown parameterization {parameterization!r}")
    m_plus_1 = annotation.count
    if m_plus_1 < degree + 1:
        raise UnderdeterminedError(
            f"{m_plus_1} annotation points cannot determine a degree-{degree} curve"
        )
    if parameterization == "uniform":
        params = ParamSet(np.linspace(0.0, 1.0, m_plus_1))
    else:
        params = chord_length_params(annotation.points)

    basis = design_matrix(params, degree)
    solution, _, rank, _ = np.linalg.lstsq(basis, annotation.points, rcond=None)
    if rank < degree + 1:
        raise DegenerateInputError("rank-deficient fit system; annotation points degenerate")
    residuals = basis @ solution - annotation.points
    rms = float(np.sqrt(np.mean(np.sum(residuals**2, axis=1))))
    return FitResult(curve=BezierCurve(solution), residual_rms=rms, parameterization=parameterization)
