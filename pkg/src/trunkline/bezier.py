"""Bernstein-basis Bezier curves: evaluation, sampling, and control-polygon geometry.

A degree-n curve is defined by n+1 ordered control points; the first and last
control points are the curve endpoints. Evaluation uses de Casteljau recursion
for numerical stability; the Bernstein basis itself is exposed for building
design matrices and loss gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# Degrees above this are rejected; binomial coefficients are kept exact below it.
MAX_DEGREE = 20


def _pascal_rows(n_max: int) -> list[list[int]]:
    rows = [[1]]
    for n in range(1, n_max + 1):
        prev = rows[-1]
        rows.append([1] + [prev[i - 1] + prev[i] for i in range(1, n)] + [1])
    return rows


_BINOMIAL = _pascal_rows(MAX_DEGREE)


def _frozen_array(values, shape_hint: str, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{shape_hint} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class BezierCurve:
    """Planar polynomial curve in Bernstein form.

    ``control_points`` is an ordered (degree+1, 2) array in pixel units. The
    standard trunk configuration is 5 control points (degree 4).
    """

    control_points: np.ndarray

    def __post_init__(self):
        pts = _frozen_array(self.control_points, "control points")
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise DomainError("control points must be an (n+1, 2) array with n >= 0")
        if pts.shape[0] - 1 > MAX_DEGREE:
            raise DomainError(f"degree {pts.shape[0] - 1} exceeds supported maximum {MAX_DEGREE}")
        object.__setattr__(self, "control_points", pts)

    @property
    def degree(self) -> int:
        return self.control_points.shape[0] - 1

    @property
    def endpoints(self) -> np.ndarray:
        """The two curve endpoints, shape (2, 2): points at t=0 and t=1."""
        return self.control_points[[0, -1]]

    def reversed(self) -> "BezierCurve":
        """Same curve traversed tail to head (control points reversed)."""
        return BezierCurve(self.control_points[::-1])

    def translated(self, offset) -> "BezierCurve":
        return BezierCurve(self.control_points + np.asarray(offset, dtype=float))


@dataclass(frozen=True, eq=False)
class ParamSet:
    """Ordered curve parameters: strictly increasing values within [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        vals = _frozen_array(self.values, "parameter values")
        if vals.ndim != 1 or vals.size < 1:
            raise DomainError("parameter values must be a non-empty 1-D array")
        if vals[0] < 0.0 or vals[-1] > 1.0:
            raise DomainError("parameters must lie within [0, 1]")
        if vals.size > 1 and not np.all(np.diff(vals) > 0):
            raise DomainError("parameters must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @property
    def count(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle, corner form (x_min, y_min) .. (x_max, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not all(np.isfinite([self.x_min, self.y_min, self.x_max, self.y_max])):
            raise DomainError("bounding box corners must be finite")
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise DomainError("bounding box corners are out of order")

    @classmethod
    def of_points(cls, points) -> "BoundingBox":
        pts = np.asarray(points, dtype=float)
        return cls(pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.x_max - self.x_min, self.y_max - self.y_min))

    @property
    def area(self) -> float:
        return float((self.x_max - self.x_min) * (self.y_max - self.y_min))

    def contains(self, points, tol: float = 0.0) -> bool:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return bool(
            np.all(pts[:, 0] >= self.x_min - tol)
            and np.all(pts[:, 0] <= self.x_max + tol)
            and np.all(pts[:, 1] >= self.y_min - tol)
            and np.all(pts[:, 1] <= self.y_max + tol)
        )


def binomial(n: int, i: int) -> int:
    """Exact binomial coefficient C(n, i) for n <= MAX_DEGREE."""
    if not 0 <= n <= MAX_DEGREE:
        raise DomainError(f"degree must be within [0, {MAX_DEGREE}], got {n}")
    if not 0 <= i <= n:
        raise DomainError(f"basis index {i} out of range for degree {n}")
    return _BINOMIAL[n][i]


def bernstein(i: int, n: int, t):
    """Bernstein basis polynomial C(n,i) * t^i * (1-t)^(n-i).

    ``t`` may be a scalar or an array; every entry must lie in [0, 1].
    """
    coeff = binomial(n, i)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError("parameter t must lie within [0, 1]")
    val = coeff * t**i * (1.0 - t) ** (n - i)
    return float(val) if val.ndim == 0 else val


def bernstein_basis(params: ParamSet | np.ndarray, degree: int) -> np.ndarray:
    """Matrix of basis values, entry (k, j) = bernstein(j, degree, t_k)."""
    ts = params.values if isinstance(params, ParamSet) else np.asarray(params, dtype=float)
    if np.any(ts < 0.0) or np.any(ts > 1.0):
        raise DomainError("parameters must lie within [0, 1]")
    if not 0 <= degree <= MAX_DEGREE:
        raise DomainError(f"degree must be within [0, {MAX_DEGREE}], got {degree}")
    cols = [binomial(degree, j) * ts**j * (1.0 - ts) ** (degree - j) for j in range(degree + 1)]
    return np.stack(cols, axis=1)


def decasteljau(control_points: np.ndarray, ts) -> np.ndarray:
    """Evaluate a Bezier curve of arbitrary point dimension by de Casteljau recursion.

    ``control_points`` has shape (n+1, d); returns shape (len(ts), d).
    """
    pts = np.asarray(control_points, dtype=float)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if np.any(ts < 0.0) or np.any(ts > 1.0):
        raise DomainError("parameter t must lie within [0, 1]")
    n = pts.shape[0] - 1
    t = ts[:, None, None]
    levels = np.broadcast_to(pts, (ts.size,) + pts.shape).copy()
    for r in range(n):
        levels = (1.0 - t) * levels[:, : n - r, :] + t * levels[:, 1 : n - r + 1, :]
    return levels[:, 0, :]


def evaluate(curve: BezierCurve, t: float) -> np.ndarray:
    """Curve point at parameter t in [0, 1], shape (2,)."""
    return decasteljau(curve.control_points, [t])[0]


def sample(curve: BezierCurve, params: ParamSet) -> np.ndarray:
    """Curve points at every parameter, shape (params.count, 2)."""
    return decasteljau(curve.control_points, params.values)


def uniform_params(count: int) -> ParamSet:
    """Equidistant parameters t_k = k/(count-1), k = 0..count-1."""
    if count < 2:
        raise DomainError(f"uniform parameter count must be >= 2, got {count}")
    return ParamSet(np.linspace(0.0, 1.0, count))


def control_bbox(curve: BezierCurve) -> BoundingBox:
    """Axis-aligned box of the control points; contains the whole curve."""
    return BoundingBox.of_points(curve.control_points)
