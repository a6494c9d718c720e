"""Synthetic trunk/depth scenes with analytically known lengths.

The image-plane curve is drawn first and the 3D oracle polyline is its
back-projection through an affine depth slab Z(u, v). Bilinear interpolation
reproduces affine surfaces exactly, so the rasterized depth map and the
analytic slab agree to floating-point precision at every on-curve location,
and the dense oracle polyline is exactly what the measurement pipeline should
recover. Scene generation and depth perturbation are deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bezier import BezierCurve, decasteljau
from .errors import DomainError, TrunklineError
from .measure import CameraIntrinsics, DepthMap, backproject

ORACLE_MIN_SAMPLES = 100_000


@dataclass(frozen=True)
class SceneConfig:
    width: int = 640
    height: int = 480
    fx: float = 500.0
    fy: float = 500.0
    cx: float | None = None  # None: image center
    cy: float | None = None
    depth_min: float = 0.8
    depth_max: float = 2.5
    span_min: float = 50.0
    span_max: float = 400.0
    margin: float = 2.0
    dense_samples: int = 100_001
    max_attempts: int = 100

    def intrinsics(self) -> CameraIntrinsics:
        cx = self.width / 2.0 if self.cx is None else self.cx
        cy = self.height / 2.0 if self.cy is None else self.cy
        return CameraIntrinsics(self.fx, self.fy, cx, cy, self.width, self.height)


@dataclass(frozen=True)
class NoiseConfig:
    """Multiplicative Gaussian depth noise plus exact-quota pixel dropout."""

    gaussian_sigma_rel: float = 0.02
    dropout_fraction: float = 0.05
    blob_dropout: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gaussian_sigma_rel:
            raise DomainError("gaussian_sigma_rel must be nonnegative")
        if not 0.0 <= self.dropout_fraction < 1.0:
            raise DomainError("dropout_fraction must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    curve2d: BezierCurve
    space_curve: np.ndarray  # dense oracle polyline, (dense_samples, 3)
    depth: DepthMap
    K: CameraIntrinsics
    oracle_length: float
    seed: int


def oracle_length(space_curve: np.ndarray) -> float:
    """Ground-truth length of a densely sampled space curve (>= 1e5 samples)."""
    pts = np.asarray(space_curve, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DomainError("space curve must be an (N, 3) polyline")
    if pts.shape[0] < ORACLE_MIN_SAMPLES:
        raise DomainError(
            f"oracle length needs at least {ORACLE_MIN_SAMPLES} samples, got {pts.shape[0]}"
        )
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def _slab_depth(pts: np.ndarray, z0: float, gx: float, gy: float, config: SceneConfig) -> np.ndarray:
    uc = (config.width - 1) / 2.0
    vc = (config.height - 1) / 2.0
    return z0 + gx * (pts[..., 0] - uc) + gy * (pts[..., 1] - vc)


def make_slab_scene(
    curve2d: BezierCurve,
    z0: float,
    gx: float = 0.0,
    gy: float = 0.0,
    config: SceneConfig | None = None,
    seed: int = 0,
) -> SyntheticScene:
    """Deterministic scene over an affine depth slab Z = z0 + gx*(u-uc) + gy*(v-vc)."""
    config = config or SceneConfig()
    K = config.intrinsics()
    uu, vv = np.meshgrid(np.arange(config.width), np.arange(config.height))
    grid = np.stack([uu, vv], axis=-1).astype(float)
    raster = _slab_depth(grid, z0, gx, gy, config)
    if np.any(raster <= 0):
        raise DomainError("slab depth must stay positive over the image")
    depth = DepthMap(raster, np.ones_like(raster, dtype=bool))

    ts = np.linspace(0.0, 1.0, config.dense_samples)
    dense2d = decasteljau(curve2d.control_points, ts)
    dense_z = _slab_depth(dense2d, z0, gx, gy, config)
    space = backproject(dense2d, dense_z, K)
    return SyntheticScene(
        curve2d=curve2d,
        space_curve=space,
        depth=depth,
        K=K,
        oracle_length=oracle_length(space),
        seed=seed,
    )


def gen_scene(seed: int, config: SceneConfig | None = None) -> SyntheticScene:
    """Random trunk over a random affine depth slab; deterministic per seed."""
    config = config or SceneConfig()
    rng = np.random.default_rng(seed)
    lo_x = config.margin
    lo_y = config.margin
    for _ in range(config.max_attempts):
        span = rng.uniform(config.span_min, config.span_max)
        angle = rng.uniform(0.2, np.pi / 2 - 0.2)
        box_w = span * np.cos(angle)
        box_h = span * np.sin(angle)
        hi_x = config.width - 1 - config.margin - box_w
        hi_y = config.height - 1 - config.margin - box_h
        if hi_x <= lo_x or hi_y <= lo_y:
            continue
        x0 = rng.uniform(lo_x, hi_x)
        y0 = rng.uniform(lo_y, hi_y)
        pts = np.stack(
            [rng.uniform(x0, x0 + box_w, 5), rng.uniform(y0, y0 + box_h, 5)], axis=1
        )
        if np.linalg.norm(pts[-1] - pts[0]) < 0.5 * span:
            continue
        z0 = rng.uniform(config.depth_min + 0.2, config.depth_max - 0.3)
        headroom = min(z0 - config.depth_min, config.depth_max - z0)
        direction = rng.uniform(0.0, 2 * np.pi)
        extent = abs(np.cos(direction)) * (config.width - 1) / 2.0 + abs(
            np.sin(direction)
        ) * (config.height - 1) / 2.0
        gmag = rng.uniform(0.0, 0.8) * headroom / max(extent, 1.0)
        return make_slab_scene(
            BezierCurve(pts),
            z0,
            gmag * np.cos(direction),
            gmag * np.sin(direction),
            config,
            seed=seed,
        )
    raise TrunklineError(f"could not place a trunk curve after {config.max_attempts} attempts")


def perturb_depth(depth_map: DepthMap, noise: NoiseConfig) -> DepthMap:
    """Apply multiplicative Gaussian noise and exact-quota dropout to valid pixels."""
    rng = np.random.default_rng(noise.seed)
    values = np.array(depth_map.values)
    validity = np.array(depth_map.validity)

    if noise.gaussian_sigma_rel > 0:
        factor = 1.0 + rng.normal(0.0, noise.gaussian_sigma_rel, int(validity.sum()))
        values[validity] *= factor
        # only a many-sigma draw can flip a depth nonpositive; demote it to a hole
        validity[validity & ~(np.isfinite(values) & (values > 0))] = False

    quota = int(round(noise.dropout_fraction * values.size))
    if quota > 0:
        valid_flat = np.flatnonzero(validity)
        quota = min(quota, valid_flat.size)
        if noise.blob_dropout:
            chosen = _blob_indices(rng, validity, quota)
        else:
            chosen = rng.choice(valid_flat, size=quota, replace=False)
        validity.flat[chosen] = False

    values[~validity] = np.nan
    return DepthMap(values, validity)


def _blob_indices(rng: np.random.Generator, validity: np.ndarray, quota: int) -> np.ndarray:
    """Contiguous disc-shaped holes totalling exactly ``quota`` pixels."""
    h, w = validity.shape
    remaining = validity.copy()
    chosen: list[np.ndarray] = []
    need = quota
    while need > 0:
        cu = rng.uniform(0, w - 1)
        cv = rng.uniform(0, h - 1)
        radius = rng.uniform(2.0, 8.0)
        u0, u1 = int(max(0, cu - radius)), int(min(w - 1, cu + radius)) + 1
        v0, v1 = int(max(0, cv - radius)), int(min(h - 1, cv + radius)) + 1
        uu, vv = np.meshgrid(np.arange(u0, u1), np.arange(v0, v1))
        dist = np.hypot(uu - cu, vv - cv).ravel()
        flat = (vv * w + uu).ravel()
        mask = (dist <= radius) & remaining.flat[flat]
        if not np.any(mask):
            continue
        candidates = flat[mask]
        order = np.argsort(dist[mask], kind="stable")
        take = candidates[order][:need]
        remaining.flat[take] = False
        chosen.append(take)
        need -= take.size
    return np.concatenate(chosen)
