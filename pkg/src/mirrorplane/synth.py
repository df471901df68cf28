"""Analytic box-room scenes with one wall-mounted planar mirror.

The camera sits inside an axis-aligned room (world frame: x right, y down,
z forward) with a yaw/pitch/roll orientation. Ground truth is exact ray
casting against the six walls. The corrupted "sensor" depth reproduces what
a time-of-flight or structured-light camera reports on a mirror: the depth
of the reflected (virtual) scene, which lies behind the mirror surface.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from . import defaults
from .errors import CameraOutsideRoom
from .geometry import CameraIntrinsics, Plane3D, canonicalize, ray_plane_depth_grid
from .imaging import DepthMap, InstanceMask, border_band

WALLS = ("-x", "+x", "-y", "+y", "-z", "+z")
CORRUPTIONS = ("behind_plane", "dropout", "mixed")


def _rotation(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """World-to-camera rotation from degrees (yaw about y, pitch about x, roll about z)."""
    a, b, c = (math.radians(v) for v in (yaw, pitch, roll))
    ry = np.array([[math.cos(a), 0, math.sin(a)], [0, 1, 0], [-math.sin(a), 0, math.cos(a)]])
    rx = np.array([[1, 0, 0], [0, math.cos(b), -math.sin(b)], [0, math.sin(b), math.cos(b)]])
    rz = np.array([[math.cos(c), -math.sin(c), 0], [math.sin(c), math.cos(c), 0], [0, 0, 1]])
    return (rz @ rx @ ry).T


def _wall_plane_world(wall: str, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, float]:
    """Outward unit normal and offset of a room wall in world coordinates."""
    axis = "xyz".index(wall[1])
    n = np.zeros(3)
    if wall[0] == "+":
        n[axis] = 1.0
        return n, float(hi[axis])
    n[axis] = -1.0
    return n, float(-lo[axis])


@dataclass
class MirrorSpec:
    """Rectangle ``center + a*axis_u + b*axis_v`` with ``|a|<=half_u``, ``|b|<=half_v``."""

    wall: str
    center: tuple[float, float, float]
    axis_u: tuple[float, float, float]
    axis_v: tuple[float, float, float]
    half_u: float
    half_v: float


@dataclass
class SceneSpec:
    K: CameraIntrinsics
    room_min: tuple[float, float, float]
    room_max: tuple[float, float, float]
    mirror: MirrorSpec
    camera_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    camera_ypr: tuple[float, float, float] = (0.0, 0.0, 0.0)
    corruption: str = "behind_plane"
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    band_outlier_fraction: float = 0.0
    border_width: float = defaults.BAND_WIDTH
    seed: int = 0

    def __post_init__(self):
        if self.corruption not in CORRUPTIONS:
            raise ValueError(f"corruption must be one of {CORRUPTIONS}")
        for name in ("outlier_fraction", "band_outlier_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.mirror.wall not in WALLS:
            raise ValueError(f"mirror wall must be one of {WALLS}")
        lo, hi = np.asarray(self.room_min, float), np.asarray(self.room_max, float)
        if np.any(hi <= lo):
            raise ValueError("room_max must exceed room_min on every axis")
        n, d = _wall_plane_world(self.mirror.wall, lo, hi)
        m = self.mirror
        u, v, c = (np.asarray(x, float) for x in (m.axis_u, m.axis_v, m.center))
        if abs(n @ c - d) > 1e-9 or abs(n @ u) > 1e-9 or abs(n @ v) > 1e-9:
            raise ValueError("mirror rectangle does not lie on its wall")
        if abs(u @ v) > 1e-9 or abs(np.linalg.norm(u) - 1) > 1e-9 or abs(np.linalg.norm(v) - 1) > 1e-9:
            raise ValueError("mirror axes must be orthonormal")

    @property
    def rotation(self) -> np.ndarray:
        return _rotation(*self.camera_ypr)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["K"] = self.K.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        data = dict(data)
        data["K"] = CameraIntrinsics.from_dict(data["K"])
        mirror = {k: tuple(v) if isinstance(v, list) else v for k, v in data["mirror"].items()}
        data["mirror"] = MirrorSpec(**mirror)
        for key in ("room_min", "room_max", "camera_position", "camera_ypr"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "SceneSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


class Walls(NamedTuple):
    """Camera-frame wall planes (outward normals, offsets) in WALLS order."""

    normals: np.ndarray
    offsets: np.ndarray


class GroundTruth(NamedTuple):
    depth: DepthMap
    mask: InstanceMask
    plane: Plane3D


def camera_walls(spec: SceneSpec) -> Walls:
    lo, hi = np.asarray(spec.room_min, float), np.asarray(spec.room_max, float)
    c = np.asarray(spec.camera_position, float)
    if not np.all((lo < c) & (c < hi)):
        raise CameraOutsideRoom(f"camera {c.tolist()} is not strictly inside the room")
    R = spec.rotation
    normals, offsets = [], []
    for wall in WALLS:
        n, d = _wall_plane_world(wall, lo, hi)
        normals.append(R @ n)
        offsets.append(d - n @ c)
    return Walls(np.array(normals), np.array(offsets))


def _cast(origins: np.ndarray, dirs: np.ndarray, walls: Walls, skip: Optional[int] = None):
    """Nearest positive wall hit per ray; returns (t, wall index)."""
    denom = dirs @ walls.normals.T
    num = walls.offsets[None, :] - origins @ walls.normals.T
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 0, num / denom, np.inf)
    if skip is not None:
        t[:, skip] = np.inf
    idx = np.argmin(t, axis=1)
    return t[np.arange(len(t)), idx], idx


def _pixel_rays(K: CameraIntrinsics) -> np.ndarray:
    dx, dy = K.ray_grid()
    return np.stack([dx, dy, np.ones(K.shape)], axis=-1).reshape(-1, 3)


def mirror_plane(spec: SceneSpec) -> Plane3D:
    walls = camera_walls(spec)
    i = WALLS.index(spec.mirror.wall)
    return canonicalize(Plane3D(tuple(walls.normals[i]), float(walls.offsets[i])))


def wall_labels(spec: SceneSpec) -> np.ndarray:
    """Index into WALLS of the wall each pixel's ray hits first."""
    walls = camera_walls(spec)
    dirs = _pixel_rays(spec.K)
    _, idx = _cast(np.zeros_like(dirs), dirs, walls)
    return idx.reshape(spec.K.shape)


def render_gt(spec: SceneSpec) -> GroundTruth:
    """Exact depth, mirror mask and canonical mirror plane for ``spec``.

    Mirror pixels take the plane depth via the same ray-plane routine used by
    refinement, so a perfectly estimated plane reproduces them bit-for-bit.
    """
    return _render(spec)[0]


def _render(spec: SceneSpec) -> tuple[GroundTruth, np.ndarray]:
    K = spec.K
    walls = camera_walls(spec)
    dirs = _pixel_rays(K)
    t, idx = _cast(np.zeros_like(dirs), dirs, walls)
    wall = WALLS.index(spec.mirror.wall)

    m = spec.mirror
    R = spec.rotation
    hits_world = (dirs * t[:, None]) @ R + np.asarray(spec.camera_position, float)
    rel = hits_world - np.asarray(m.center, float)
    a = rel @ np.asarray(m.axis_u, float)
    b = rel @ np.asarray(m.axis_v, float)
    on_mirror = (idx == wall) & (np.abs(a) <= m.half_u) & (np.abs(b) <= m.half_v)
    mask = on_mirror.reshape(K.shape)

    plane = canonicalize(Plane3D(tuple(walls.normals[wall]), float(walls.offsets[wall])))
    depth = t.reshape(K.shape).copy()
    zplane, valid = ray_plane_depth_grid(plane, K)
    sel = mask & valid
    depth[sel] = zplane[sel]
    return GroundTruth(DepthMap(depth), InstanceMask(mask, 0), plane), idx.reshape(K.shape)


def virtual_depth(gt: DepthMap, mask: InstanceMask, plane: Plane3D, spec: SceneSpec) -> np.ndarray:
    """Depth of the reflected scene seen through each mirror pixel (NaN elsewhere).

    The ray is reflected at the mirror, cast to the next wall, and the total
    path is unfolded back along the original ray: ``z_virtual = z_mirror + t``
    with ``t > 0`` the reflected-ray length (rays have unit z component).
    """
    walls = camera_walls(spec)
    wall = WALLS.index(spec.mirror.wall)
    dirs = _pixel_rays(spec.K)
    sel = mask.bits.ravel()
    n = np.asarray(plane.normal)
    d = dirs[sel]
    z = gt.data.ravel()[sel]
    hit = d * z[:, None]
    refl = d - 2.0 * (d @ n)[:, None] * n[None, :]
    t, _ = _cast(hit, refl, walls, skip=wall)
    out = np.full(gt.data.size, np.nan)
    out[sel] = z + t
    return out.reshape(gt.shape)


def corrupt(gt: DepthMap, mask: InstanceMask, plane: Plane3D, spec: SceneSpec) -> DepthMap:
    """Sensor-style corruption of a ground-truth frame, deterministic per seed.

    ``behind_plane`` replaces mirror pixels with the virtual-reflection depth;
    ``dropout`` zeroes each mirror pixel with probability ``outlier_fraction``;
    ``mixed`` applies both. Independently, border-band pixels get Gaussian
    noise (``noise_sigma``) and a ``band_outlier_fraction`` of them are replaced
    with a uniform random depth in [0.5, 1.5] x ground truth.
    """
    rng = np.random.default_rng(spec.seed)
    out = gt.data.copy()
    bits = mask.bits
    if bits.any() and (spec.noise_sigma > 0 or spec.band_outlier_fraction > 0):
        band = border_band(bits, spec.border_width).bits & (gt.data > 0)
        vs, us = np.nonzero(band)
        if spec.noise_sigma > 0:
            out[vs, us] = np.maximum(out[vs, us] + rng.normal(0.0, spec.noise_sigma, len(vs)), 0.0)
        if spec.band_outlier_fraction > 0:
            hit = rng.random(len(vs)) < spec.band_outlier_fraction
            out[vs[hit], us[hit]] = gt.data[vs[hit], us[hit]] * rng.uniform(0.5, 1.5, int(hit.sum()))
    if spec.corruption in ("behind_plane", "mixed"):
        virt = virtual_depth(gt, mask, plane, spec)
        out[bits] = virt[bits]
    if spec.corruption in ("dropout", "mixed"):
        vs, us = np.nonzero(bits)
        drop = rng.random(len(vs)) < spec.outlier_fraction
        out[vs[drop], us[drop]] = 0.0
    return DepthMap(out, gt.scale)


def default_intrinsics(width: int = 256, height: int = 192, hfov_deg: float = 70.0) -> CameraIntrinsics:
    f = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
    return CameraIntrinsics(f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height)


@dataclass
class SceneOptions:
    """Knobs for :func:`random_scene` beyond the geometry it samples."""

    corruption: str = "behind_plane"
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    band_outlier_fraction: float = 0.0
    border_width: float = defaults.BAND_WIDTH
    min_mask_px: int = 200
    max_attempts: int = 200
    extra: dict = field(default_factory=dict)


def _wall_axes(wall: str) -> tuple[np.ndarray, np.ndarray]:
    axis = "xyz".index(wall[1])
    others = [i for i in range(3) if i != axis]
    e = np.eye(3)
    return e[others[0]], e[others[1]]


def random_scene(seed: int, K: Optional[CameraIntrinsics] = None, options: Optional[SceneOptions] = None) -> SceneSpec:
    """Sample a valid scene: visible mirror, border band entirely on the mirror wall.

    Rejection-samples room size, camera orientation and mirror placement from
    ``seed``; the first candidate whose mask has at least ``min_mask_px``
    pixels and whose border band only sees the mirror's own wall is returned.
    """
    K = K or default_intrinsics()
    opts = options or SceneOptions()
    rng = np.random.default_rng(seed)
    for _ in range(opts.max_attempts):
        lo = np.array([-rng.uniform(1.5, 3.0), -rng.uniform(0.8, 1.4), -rng.uniform(1.0, 2.5)])
        hi = np.array([rng.uniform(1.5, 3.0), rng.uniform(0.8, 1.6), rng.uniform(2.5, 5.0)])
        ypr = (rng.uniform(-35, 35), rng.uniform(-15, 15), rng.uniform(-5, 5))
        R = _rotation(*ypr)
        forward = R.T @ np.array([0.0, 0.0, 1.0])
        best_t, wall = np.inf, None
        for name in WALLS:
            n, d = _wall_plane_world(name, lo, hi)
            if n @ forward > 0 and d / (n @ forward) < best_t:
                best_t, wall = d / (n @ forward), name
        if wall in ("-y", "+y"):
            continue
        hit = forward * best_t
        ax_a, ax_b = _wall_axes(wall)
        theta = math.radians(rng.uniform(-20, 20))
        u = math.cos(theta) * ax_a + math.sin(theta) * ax_b
        v = -math.sin(theta) * ax_a + math.cos(theta) * ax_b
        half_u, half_v = rng.uniform(0.15, 0.5), rng.uniform(0.15, 0.5)
        center = hit + rng.uniform(-0.3, 0.3) * u + rng.uniform(-0.3, 0.3) * v
        axis = "xyz".index(wall[1])
        center[axis] = hi[axis] if wall[0] == "+" else lo[axis]
        tangent = [i for i in range(3) if i != axis]
        corners = np.array([center + su * half_u * u + sv * half_v * v for su in (-1, 1) for sv in (-1, 1)])
        margin = 0.05
        if np.any(corners[:, tangent] <= lo[tangent] + margin) or np.any(corners[:, tangent] >= hi[tangent] - margin):
            continue
        spec = SceneSpec(
            K=K,
            room_min=tuple(lo.tolist()),
            room_max=tuple(hi.tolist()),
            mirror=MirrorSpec(wall, tuple(center.tolist()), tuple(u.tolist()), tuple(v.tolist()), half_u, half_v),
            camera_ypr=tuple(float(x) for x in ypr),
            corruption=opts.corruption,
            noise_sigma=opts.noise_sigma,
            outlier_fraction=opts.outlier_fraction,
            band_outlier_fraction=opts.band_outlier_fraction,
            border_width=opts.border_width,
            seed=int(rng.integers(2**31)),
            **opts.extra,
        )
        gt, labels = _render(spec)
        if gt.mask.area < opts.min_mask_px:
            continue
        band = border_band(gt.mask, opts.border_width).bits
        if np.count_nonzero(band) < 50 or np.any(labels[band] != WALLS.index(wall)):
            continue
        return spec
    raise RuntimeError(f"no valid scene found for seed {seed} in {opts.max_attempts} attempts")
