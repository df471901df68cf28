"""Depth-map and mask I/O, border bands, IoU and point-cloud export.

On disk, depth is a 16-bit single-channel PNG holding ``round(meters * scale)``
(scale 1000 by default, 4000 for Matterport-style captures) and masks are 8-bit
PNGs where any nonzero value marks an instance pixel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import png
from scipy import ndimage

from . import defaults
from .errors import BadFormat, DimensionMismatch, EmptyMask
from .geometry import CameraIntrinsics, backproject_pixels

DEFAULT_DEPTH_SCALE = defaults.DEPTH_SCALE
U16_MAX = 65535


@dataclass
class DepthMap:
    """Metric depth grid of shape (height, width); 0 means no reading."""

    data: np.ndarray
    scale: float = DEFAULT_DEPTH_SCALE

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError(f"depth must be 2-D, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)) or np.any(self.data < 0):
            raise ValueError("depth values must be finite and >= 0")
        if not self.scale > 0:
            raise ValueError("depth scale must be positive")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def copy(self) -> "DepthMap":
        return DepthMap(self.data.copy(), self.scale)


@dataclass
class InstanceMask:
    bits: np.ndarray
    instance_id: int = 0

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {self.bits.shape}")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    @property
    def area(self) -> int:
        return int(self.bits.sum())


@dataclass
class BorderBand:
    bits: np.ndarray
    width_px: float


@dataclass
class PointCloud:
    xyz: np.ndarray
    rgb: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.xyz)


@dataclass
class IndexEntry:
    """One row of an instance index JSON file."""

    instance_id: int
    mask_path: str
    plane_path: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"instance_id": self.instance_id, "mask_path": self.mask_path, "plane_path": self.plane_path}
        out.update(self.extra)
        return out


def _bits(mask) -> np.ndarray:
    return mask.bits if isinstance(mask, InstanceMask) else np.asarray(mask, dtype=bool)


def _read_png(path):
    try:
        width, height, rows, info = png.Reader(filename=str(path)).read()
        arr = np.vstack([np.asarray(row) for row in rows]) if height else np.zeros((0, width))
    except png.Error as exc:
        raise BadFormat(f"{path}: {exc}") from exc
    return arr.reshape(height, -1), info


def read_depth(path, scale: float = DEFAULT_DEPTH_SCALE) -> DepthMap:
    raw = read_depth_raw(path)
    return DepthMap(raw.astype(np.float64) / scale, scale)


def read_depth_raw(path) -> np.ndarray:
    """Raw uint16 grid of a 16-bit grayscale PNG."""
    arr, info = _read_png(path)
    if info.get("bitdepth") != 16 or not info.get("greyscale") or info.get("alpha") or info.get("planes") != 1:
        raise BadFormat(
            f"{path}: expected 16-bit single-channel grayscale PNG, got bitdepth={info.get('bitdepth')} "
            f"planes={info.get('planes')}"
        )
    return arr.astype(np.uint16)


def depth_to_raw(depth: DepthMap) -> np.ndarray:
    raw = np.rint(depth.data * depth.scale)
    if np.any(raw > U16_MAX):
        raise ValueError(
            f"depth {depth.data.max():.4f} m exceeds the 16-bit range at scale {depth.scale}"
        )
    return raw.astype(np.uint16)


def write_depth_raw(path, raw: np.ndarray) -> None:
    raw = np.asarray(raw, dtype=np.uint16)
    writer = png.Writer(width=raw.shape[1], height=raw.shape[0], greyscale=True, bitdepth=16)
    with open(path, "wb") as fh:
        writer.write(fh, raw.tolist())


def write_depth(path, depth: DepthMap) -> None:
    write_depth_raw(path, depth_to_raw(depth))


def read_mask(path, instance_id: int = 0) -> InstanceMask:
    arr, info = _read_png(path)
    if info.get("bitdepth") != 8 or not info.get("greyscale") or info.get("alpha"):
        raise BadFormat(f"{path}: expected 8-bit grayscale mask PNG")
    return InstanceMask(arr != 0, instance_id)


def write_mask(path, mask) -> None:
    bits = _bits(mask)
    img = np.where(bits, 255, 0).astype(np.uint8)
    writer = png.Writer(width=bits.shape[1], height=bits.shape[0], greyscale=True, bitdepth=8)
    with open(path, "wb") as fh:
        writer.write(fh, img.tolist())


def read_index(path) -> list[IndexEntry]:
    """Parse an instance index; relative paths resolve against the index file."""
    base = Path(path).parent
    entries = []
    for row in json.loads(Path(path).read_text()):
        extra = {k: v for k, v in row.items() if k not in ("instance_id", "mask_path", "plane_path")}
        plane = row.get("plane_path")
        entries.append(
            IndexEntry(
                instance_id=int(row["instance_id"]),
                mask_path=str(base / row["mask_path"]),
                plane_path=str(base / plane) if plane else None,
                extra=extra,
            )
        )
    return entries


def write_index(path, entries) -> None:
    rows = [e.to_dict() if isinstance(e, IndexEntry) else dict(e) for e in entries]
    Path(path).write_text(json.dumps(rows, indent=2) + "\n")


def border_band(mask, width_px: float, metric: str = "euclidean") -> BorderBand:
    """Pixels outside ``mask`` within ``width_px`` of it, clipped to the image.

    ``metric`` is ``"euclidean"`` (disk dilation) or ``"chebyshev"`` (square
    dilation).
    """
    bits = _bits(mask)
    if width_px < 1:
        raise ValueError(f"band width must be >= 1, got {width_px}")
    if not bits.any():
        raise EmptyMask("cannot build a border band around an empty mask")
    if metric == "euclidean":
        # nearest-mask-pixel indices give exact integer squared distances
        ii, jj = ndimage.distance_transform_edt(~bits, return_distances=False, return_indices=True)
        rows, cols = np.indices(bits.shape)
        within = (rows - ii) ** 2 + (cols - jj) ** 2 <= width_px * width_px
    elif metric == "chebyshev":
        dist = ndimage.distance_transform_cdt(~bits, metric="chessboard")
        within = dist <= width_px
    else:
        raise ValueError(f"unknown band metric {metric!r}")
    return BorderBand(within & ~bits, width_px)


def iou(a, b) -> float:
    a, b = _bits(a), _bits(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def to_pointcloud(depth: DepthMap, K: CameraIntrinsics, color: Optional[np.ndarray] = None) -> PointCloud:
    """Back-project every pixel with positive depth."""
    if depth.shape != K.shape:
        raise DimensionMismatch(f"depth {depth.shape} does not match intrinsics {K.shape}")
    vs, us = np.nonzero(depth.data > 0)
    xyz = backproject_pixels(us, vs, depth.data[vs, us], K)
    rgb = None
    if color is not None:
        color = np.asarray(color)
        if color.shape[:2] != depth.shape or color.ndim != 3 or color.shape[2] != 3:
            raise DimensionMismatch(f"color {color.shape} does not match depth {depth.shape}")
        rgb = color[vs, us].astype(np.uint8)
    return PointCloud(xyz, rgb)


def write_ply(path, cloud: PointCloud) -> None:
    """Write an ASCII PLY 1.0 file with float x,y,z (+ uchar r,g,b)."""
    colored = cloud.rgb is not None
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud.xyz)}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if colored:
        lines += ["property uchar red", "property uchar green", "property uchar blue"]
    lines.append("end_header")
    xyz = np.asarray(cloud.xyz, dtype=np.float32).reshape(-1, 3)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
        if colored:
            rgb = np.asarray(cloud.rgb, dtype=np.uint8).reshape(-1, 3)
            for (x, y, z), (r, g, b) in zip(xyz.tolist(), rgb.tolist()):
                fh.write(f"{_f32(x)} {_f32(y)} {_f32(z)} {r} {g} {b}\n")
        else:
            for x, y, z in xyz.tolist():
                fh.write(f"{_f32(x)} {_f32(y)} {_f32(z)}\n")


def _f32(value: float) -> str:
    return f"{value:.9g}"
