"""Pinhole camera math, plane algebra and ray-plane intersection.

Conventions: camera frame with +z forward along the optical axis, pixel
``(u, v)`` = (column, row), depth = z-coordinate (not ray length). A plane is
the point set ``{p : n . p = d}`` with unit normal ``n``.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    BehindCamera,
    NonPositiveDepth,
    NonUnitInput,
    OutOfBounds,
    RayParallel,
    ZeroNormal,
)

PARALLEL_EPS = 1e-12
UNIT_TOL = 1e-9
# norms this close to 1 are treated as already unit, which keeps
# normalization idempotent bit-for-bit
UNIT_ULPS = 4 * sys.float_info.epsilon


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width), i.e. the numpy shape of a matching image."""
        return (self.height, self.width)

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def contains(self, u: float, v: float) -> bool:
        return 0 <= u < self.width and 0 <= v < self.height

    def ray_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-pixel ray slopes ``((u-cx)/fx, (v-cy)/fy)``, each shaped (H, W)."""
        u = np.arange(self.width, dtype=np.float64)
        v = np.arange(self.height, dtype=np.float64)
        dx = (u - self.cx) / self.fx
        dy = (v - self.cy) / self.fy
        return np.broadcast_to(dx, self.shape), np.broadcast_to(dy[:, None], self.shape)

    def to_dict(self) -> dict:
        return {
            "fx": float(self.fx),
            "fy": float(self.fy),
            "cx": float(self.cx),
            "cy": float(self.cy),
            "width": int(self.width),
            "height": int(self.height),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CameraIntrinsics":
        return cls(
            fx=float(data["fx"]),
            fy=float(data["fy"]),
            cx=float(data["cx"]),
            cy=float(data["cy"]),
            width=int(data["width"]),
            height=int(data["height"]),
        )

    @classmethod
    def load(cls, path) -> "CameraIntrinsics":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


class Point3(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Plane3D:
    """Plane ``{p : normal . p = offset}`` in camera coordinates.

    Construction does not normalize; use :func:`canonicalize` (or
    :meth:`from_normal_offset`) to get the unit, camera-facing form.
    """

    normal: tuple[float, float, float]
    offset: float

    def __post_init__(self):
        n = tuple(float(c) for c in self.normal)
        if len(n) != 3 or not all(math.isfinite(c) for c in n):
            raise ValueError(f"plane normal must be a finite 3-vector, got {self.normal!r}")
        if not math.isfinite(self.offset):
            raise ValueError("plane offset must be finite")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_normal_offset(cls, normal: Sequence[float], offset: float) -> "Plane3D":
        return canonicalize(cls(tuple(normal), offset))

    def signed_distance(self, points) -> np.ndarray:
        """``n . p - d`` for an (N, 3) array (metric only for unit normals)."""
        return np.asarray(points, dtype=np.float64) @ np.asarray(self.normal) - self.offset

    def to_dict(self) -> dict:
        return {"normal": list(self.normal), "offset": self.offset}

    @classmethod
    def from_dict(cls, data: dict) -> "Plane3D":
        return canonicalize(cls(tuple(data["normal"]), data["offset"]))

    @classmethod
    def load(cls, path) -> "Plane3D":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(canonicalize(self).to_dict(), indent=2) + "\n")


def canonicalize(plane: Plane3D) -> Plane3D:
    """Return the unit-normal, sign-canonical representation of ``plane``.

    Canonical sign: ``n_z <= 0``; when ``n_z == 0`` the first nonzero of
    ``(n_x, n_y)`` is positive. The offset is scaled/flipped with the normal
    so the point set is unchanged.
    """
    nx, ny, nz = plane.normal
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    if norm == 0.0:
        raise ZeroNormal("plane normal has zero length")
    d = plane.offset
    if abs(norm - 1.0) > UNIT_ULPS:
        nx, ny, nz, d = nx / norm, ny / norm, nz / norm, d / norm
    if nz > 0 or (nz == 0 and (nx < 0 or (nx == 0 and ny < 0))):
        nx, ny, nz, d = -nx, -ny, -nz, -d
    # + 0.0 folds negative zeros so equal planes serialize identically
    return Plane3D((nx + 0.0, ny + 0.0, nz + 0.0), d + 0.0)


def is_canonical(plane: Plane3D, tol: float = UNIT_TOL) -> bool:
    nx, ny, nz = plane.normal
    if abs(math.sqrt(nx * nx + ny * ny + nz * nz) - 1.0) > tol:
        return False
    if nz > 0:
        return False
    if nz == 0:
        return nx > 0 or (nx == 0 and ny > 0)
    return True


def backproject(u: float, v: float, depth: float, K: CameraIntrinsics) -> Point3:
    if not depth > 0:
        raise NonPositiveDepth(f"depth must be positive, got {depth}")
    if not K.contains(u, v):
        raise OutOfBounds(f"pixel ({u}, {v}) outside {K.width}x{K.height}")
    return Point3((u - K.cx) / K.fx * depth, (v - K.cy) / K.fy * depth, float(depth))


def project(point: Sequence[float], K: CameraIntrinsics) -> tuple[float, float]:
    x, y, z = point
    if not z > 0:
        raise BehindCamera(f"point with z={z} cannot be projected")
    return (K.fx * x / z + K.cx, K.fy * y / z + K.cy)


def backproject_pixels(
    us: np.ndarray, vs: np.ndarray, depths: np.ndarray, K: CameraIntrinsics
) -> np.ndarray:
    """Vectorized :func:`backproject` without validation; returns (N, 3)."""
    z = np.asarray(depths, dtype=np.float64)
    x = (np.asarray(us, dtype=np.float64) - K.cx) / K.fx * z
    y = (np.asarray(vs, dtype=np.float64) - K.cy) / K.fy * z
    return np.stack([x, y, z], axis=-1)


def ray_plane_depth(u: float, v: float, plane: Plane3D, K: CameraIntrinsics) -> float:
    """Depth (z) at which the ray through pixel ``(u, v)`` meets ``plane``.

    Raises:
        OutOfBounds: pixel outside the image.
        RayParallel: ``|n . dir| < 1e-12``.
        BehindCamera: the intersection has ``z <= 0``.
    """
    if not K.contains(u, v):
        raise OutOfBounds(f"pixel ({u}, {v}) outside {K.width}x{K.height}")
    nx, ny, nz = plane.normal
    denom = nx * ((u - K.cx) / K.fx) + ny * ((v - K.cy) / K.fy) + nz
    if abs(denom) < PARALLEL_EPS:
        raise RayParallel(f"ray through ({u}, {v}) is parallel to the plane")
    z = plane.offset / denom
    if not z > 0:
        raise BehindCamera(f"ray through ({u}, {v}) meets the plane behind the camera")
    return z


def ray_plane_depth_grid(plane: Plane3D, K: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Plane depth for every pixel plus a validity grid.

    Uses the same arithmetic as :func:`ray_plane_depth`, so valid entries are
    bit-identical to the scalar result. Invalid (parallel or behind-camera)
    entries are NaN in the depth grid.
    """
    nx, ny, nz = plane.normal
    dx, dy = K.ray_grid()
    denom = nx * dx + ny * dy + nz
    parallel = np.abs(denom) < PARALLEL_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        z = plane.offset / np.where(parallel, np.nan, denom)
    valid = ~parallel & (z > 0)
    z = np.where(valid, z, np.nan)
    return z, valid


def angle_between(n1: Sequence[float], n2: Sequence[float], tol: float = 1e-6) -> float:
    """Angle in degrees between two unit vectors, in [0, 180]."""
    a = np.asarray(n1, dtype=np.float64)
    b = np.asarray(n2, dtype=np.float64)
    for vec in (a, b):
        if vec.shape != (3,) or abs(np.linalg.norm(vec) - 1.0) > tol:
            raise NonUnitInput(f"expected a unit 3-vector, got {vec.tolist()}")
    # atan2 form of arccos(clamp(a.b)): same angle, but well conditioned near
    # 0 and 180 degrees where arccos cannot resolve below ~1e-6 degrees
    dot = float(a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
    cross = float(np.linalg.norm(np.cross(a, b)))
    return math.degrees(math.atan2(cross, dot))


def normalize(vec: Sequence[float]) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ZeroNormal("cannot normalize a zero vector")
    return v if abs(norm - 1.0) <= UNIT_ULPS else v / norm


def canonical_sign(vec: Sequence[float]) -> np.ndarray:
    """Flip a direction vector into the canonical hemisphere used for planes."""
    v = np.asarray(vec, dtype=np.float64)
    nx, ny, nz = v
    if nz > 0 or (nz == 0 and (nx < 0 or (nx == 0 and ny < 0))):
        v = -v
    return v + 0.0


def camera_side(plane: Plane3D) -> float:
    """Sign of ``n . p - d`` for points on the camera's side of ``plane``."""
    return 1.0 if -plane.offset > 0 else -1.0
