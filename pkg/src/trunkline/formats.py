"""Parsers and writers for the toolkit's file formats.

Record files are JSON lines, one object per line:

* annotations: ``{"image_id": str, "bbox": [x1, y1, x2, y2],
  "keypoints": [[x, y], ...]}`` with at least 2 ordered head-to-tail keypoints.
* predictions: ``{"image_id": str, "confidence": float, "bbox": [...],
  "control_points": [[x, y] * 5]}`` (quartic head, exactly 5 control points).
* curves (fitted ground truth): like predictions but with any number of
  control points >= 2, optional ``confidence``/``bbox``, and optional
  ``residual_rms``/``parameterization`` from the fit.

Depth rasters are grayscale PFM (``Pf`` magic, scale line sign gives
endianness, rows stored bottom to top) or raw float32 with an 8-byte
little-endian header (uint32 width, uint32 height) followed by row-major
top-to-bottom data. Non-finite or nonpositive depth values decode as invalid.

Intrinsics are ``key = value`` text with keys fx, fy, cx, cy, width, height;
``#`` starts a comment.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ParseError, ValidationError
from .measure import CameraIntrinsics, DepthMap

INTRINSIC_KEYS = ("fx", "fy", "cx", "cy", "width", "height")
PREDICTION_CONTROL_POINTS = 5


@dataclass(frozen=True, eq=False)
class AnnotationRecord:
    image_id: str
    bbox: tuple[float, float, float, float]
    keypoints: np.ndarray

    def __post_init__(self):
        _check_bbox(self.bbox)
        pts = np.array(self.keypoints, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise DomainError("keypoints must be an (k>=2, 2) array")
        if not np.all(np.isfinite(pts)):
            raise DomainError("keypoint coordinates must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "keypoints", pts)
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))


@dataclass(frozen=True, eq=False)
class PredictionRecord:
    image_id: str
    confidence: float
    bbox: tuple[float, float, float, float]
    control_points: np.ndarray

    def __post_init__(self):
        _check_bbox(self.bbox)
        if not 0.0 <= self.confidence <= 1.0:
            raise DomainError(f"confidence must lie in [0, 1], got {self.confidence}")
        pts = np.array(self.control_points, dtype=float)
        if pts.shape != (PREDICTION_CONTROL_POINTS, 2):
            raise DomainError(
                f"predictions carry exactly {PREDICTION_CONTROL_POINTS} control points"
            )
        if not np.all(np.isfinite(pts)):
            raise DomainError("control points must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "control_points", pts)
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))


@dataclass(frozen=True, eq=False)
class CurveRecord:
    """A stored curve: fitted ground truth or a prediction read generically."""

    image_id: str
    control_points: np.ndarray
    confidence: float | None = None
    bbox: tuple[float, float, float, float] | None = None
    residual_rms: float | None = None
    parameterization: str | None = None

    def __post_init__(self):
        pts = np.array(self.control_points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise DomainError("curve records need at least 2 control points")
        if not np.all(np.isfinite(pts)):
            raise DomainError("control points must be finite")
        if self.bbox is not None:
            _check_bbox(self.bbox)
            object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise DomainError(f"confidence must lie in [0, 1], got {self.confidence}")
        pts.flags.writeable = False
        object.__setattr__(self, "control_points", pts)


def _check_bbox(bbox) -> None:
    if len(bbox) != 4 or not all(np.isfinite(v) for v in bbox):
        raise DomainError("bbox must be four finite numbers (x1, y1, x2, y2)")
    x1, y1, x2, y2 = bbox
    if not (x1 < x2 and y1 < y2):
        raise DomainError("bbox corners must satisfy x1 < x2 and y1 < y2")


def _iter_json_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", path=path, line=lineno) from exc
            if not isinstance(obj, dict):
                raise ParseError("each line must hold a JSON object", path=path, line=lineno)
            yield lineno, obj


def _field(obj: dict, key: str, path, lineno: int):
    if key not in obj:
        raise ValidationError(f"missing field {key!r}", path=path, line=lineno)
    return obj[key]


def parse_annotations(path) -> list[AnnotationRecord]:
    records = []
    for lineno, obj in _iter_json_lines(path):
        try:
            records.append(
                AnnotationRecord(
                    image_id=str(_field(obj, "image_id", path, lineno)),
                    bbox=tuple(_field(obj, "bbox", path, lineno)),
                    keypoints=_field(obj, "keypoints", path, lineno),
                )
            )
        except (DomainError, TypeError) as exc:
            raise ValidationError(str(exc), path=path, line=lineno) from exc
    return records


def write_annotations(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "image_id": rec.image_id,
                        "bbox": list(rec.bbox),
                        "keypoints": rec.keypoints.tolist(),
                    }
                )
                + "\n"
            )


def parse_predictions(path) -> list[PredictionRecord]:
    records = []
    for lineno, obj in _iter_json_lines(path):
        try:
            records.append(
                PredictionRecord(
                    image_id=str(_field(obj, "image_id", path, lineno)),
                    confidence=float(_field(obj, "confidence", path, lineno)),
                    bbox=tuple(_field(obj, "bbox", path, lineno)),
                    control_points=_field(obj, "control_points", path, lineno),
                )
            )
        except (DomainError, TypeError) as exc:
            raise ValidationError(str(exc), path=path, line=lineno) from exc
    return records


def write_predictions(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "image_id": rec.image_id,
                        "confidence": rec.confidence,
                        "bbox": list(rec.bbox),
                        "control_points": rec.control_points.tolist(),
                    }
                )
                + "\n"
            )


def parse_curves(path) -> list[CurveRecord]:
    """Parse curve records; also accepts prediction files (confidence kept)."""
    records = []
    for lineno, obj in _iter_json_lines(path):
        try:
            records.append(
                CurveRecord(
                    image_id=str(_field(obj, "image_id", path, lineno)),
                    control_points=_field(obj, "control_points", path, lineno),
                    confidence=obj.get("confidence"),
                    bbox=tuple(obj["bbox"]) if obj.get("bbox") is not None else None,
                    residual_rms=obj.get("residual_rms"),
                    parameterization=obj.get("parameterization"),
                )
            )
        except (DomainError, TypeError) as exc:
            raise ValidationError(str(exc), path=path, line=lineno) from exc
    return records


def write_curves(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {"image_id": rec.image_id, "control_points": rec.control_points.tolist()}
            if rec.confidence is not None:
                obj["confidence"] = rec.confidence
            if rec.bbox is not None:
                obj["bbox"] = list(rec.bbox)
            if rec.residual_rms is not None:
                obj["residual_rms"] = rec.residual_rms
            if rec.parameterization is not None:
                obj["parameterization"] = rec.parameterization
            fh.write(json.dumps(obj) + "\n")


# --- depth rasters -----------------------------------------------------------


def write_depth(depth_map: DepthMap, path, fmt: str | None = None) -> None:
    fmt = fmt or _format_from_suffix(path)
    if fmt == "pfm":
        _write_pfm(depth_map, path)
    elif fmt == "raw":
        _write_raw(depth_map, path)
    else:
        raise DomainError(f"unknown depth format {fmt!r}")


def parse_depth(path, fmt: str | None = None) -> DepthMap:
    if fmt is None:
        try:
            fmt = _format_from_suffix(path)
        except DomainError:
            with open(path, "rb") as fh:
                magic = fh.read(2)
            fmt = "pfm" if magic in (b"Pf", b"PF") else "raw"
    if fmt == "pfm":
        return _parse_pfm(path)
    if fmt == "raw":
        return _parse_raw(path)
    raise DomainError(f"unknown depth format {fmt!r}")


def _format_from_suffix(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        return "pfm"
    if suffix in (".f32", ".raw"):
        return "raw"
    raise DomainError(f"cannot infer depth format from suffix {suffix!r}")


def _write_pfm(depth_map: DepthMap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{depth_map.width} {depth_map.height}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.flipud(depth_map.values).astype("<f4").tobytes())


def _parse_pfm(path) -> DepthMap:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic == b"PF":
            raise ParseError("color PFM not supported, expected grayscale 'Pf'", path=path, line=1)
        if magic != b"Pf":
            raise ParseError(f"bad PFM magic {magic!r}", path=path, line=1)
        dims = fh.readline().split()
        if len(dims) != 2:
            raise ParseError("expected 'width height' on line 2", path=path, line=2)
        try:
            width, height = int(dims[0]), int(dims[1])
        except ValueError as exc:
            raise ParseError("non-integer PFM dimensions", path=path, line=2) from exc
        if width < 1 or height < 1:
            raise ParseError("PFM dimensions must be positive", path=path, line=2)
        try:
            scale = float(fh.readline().strip())
        except ValueError as exc:
            raise ParseError("bad PFM scale line", path=path, line=3) from exc
        payload = fh.read(width * height * 4)
        if len(payload) != width * height * 4:
            raise ParseError(
                f"truncated PFM payload: expected {width * height * 4} bytes, "
                f"got {len(payload)}",
                path=path,
            )
        dtype = "<f4" if scale < 0 else ">f4"
        values = np.frombuffer(payload, dtype=dtype).reshape(height, width)
        return DepthMap.from_values(np.flipud(values).astype(float))


def _write_raw(depth_map: DepthMap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", depth_map.width, depth_map.height))
        fh.write(depth_map.values.astype("<f4").tobytes())


def _parse_raw(path) -> DepthMap:
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise ParseError("truncated raw-depth header", path=path)
        width, height = struct.unpack("<II", header)
        if width < 1 or height < 1:
            raise ParseError("raw-depth dimensions must be positive", path=path)
        payload = fh.read(width * height * 4 + 1)
        if len(payload) != width * height * 4:
            raise ParseError(
                f"raw-depth payload size mismatch for {width}x{height}", path=path
            )
        values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
        return DepthMap.from_values(values.astype(float))


# --- intrinsics --------------------------------------------------------------


def parse_intrinsics(path) -> CameraIntrinsics:
    found: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ParseError("expected 'key = value'", path=path, line=lineno)
            key, _, value = text.partition("=")
            key = key.strip()
            if key not in INTRINSIC_KEYS:
                raise ValidationError(f"unknown intrinsics key {key!r}", path=path, line=lineno)
            try:
                found[key] = float(value.strip())
            except ValueError as exc:
                raise ParseError(f"bad numeric value for {key!r}", path=path, line=lineno) from exc
    for key in INTRINSIC_KEYS:
        if key not in found:
            raise ParseError(f"missing intrinsics key {key!r}", path=path)
    for key in ("width", "height"):
        if found[key] != int(found[key]):
            raise ValidationError(f"{key} must be an integer pixel count", path=path)
    try:
        return CameraIntrinsics(
            fx=found["fx"],
            fy=found["fy"],
            cx=found["cx"],
            cy=found["cy"],
            width=int(found["width"]),
            height=int(found["height"]),
        )
    except DomainError as exc:
        raise ValidationError(str(exc), path=path) from exc


def write_intrinsics(K: CameraIntrinsics, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in INTRINSIC_KEYS:
            fh.write(f"{key} = {getattr(K, key)!r}\n")
