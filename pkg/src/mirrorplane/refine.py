"""Rewrite mirror-region depth from estimated mirror planes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import defaults
from .errors import DimensionMismatch, MirrorPlaneError, NoBorderPoints
from .geometry import CameraIntrinsics, Plane3D, backproject_pixels, ray_plane_depth_grid
from .imaging import DepthMap, InstanceMask, border_band
from .plane_fit import RansacConfig, offset_from_border, ransac_plane

AUTO = "auto"
DEFAULT_BAND_WIDTH = defaults.BAND_WIDTH


@dataclass
class InstanceOutcome:
    instance_id: int
    plane: Optional[Plane3D] = None
    replaced_px: int = 0
    skipped_px: int = 0
    error: Optional[MirrorPlaneError] = None
    inliers: int = 0
    band_points: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "plane": self.plane.to_dict() if self.plane else None,
            "replaced_px": self.replaced_px,
            "skipped_px": self.skipped_px,
            "band_points": self.band_points,
            "inliers": self.inliers,
            "error": None if self.error is None else {"code": self.error.code, "message": str(self.error)},
        }


@dataclass
class RefinementResult:
    depth: DepthMap
    replaced_px: int
    skipped_px: int
    instances: list[InstanceOutcome] = field(default_factory=list)

    @property
    def failed(self) -> list[InstanceOutcome]:
        return [o for o in self.instances if not o.ok]


def _check_dims(depth: DepthMap, mask_shape, K: CameraIntrinsics) -> None:
    if depth.shape != K.shape:
        raise DimensionMismatch(f"depth {depth.shape} does not match intrinsics {K.shape}")
    if mask_shape != depth.shape:
        raise DimensionMismatch(f"mask {mask_shape} does not match depth {depth.shape}")


def refine_depth(depth: DepthMap, mask: InstanceMask, plane: Plane3D, K: CameraIntrinsics) -> RefinementResult:
    """Replace depth inside ``mask`` with the ray-plane intersection depth.

    Pixels whose ray is parallel to the plane or meets it behind the camera
    keep their input value and are counted as skipped. Nothing outside the
    mask is written.
    """
    _check_dims(depth, mask.shape, K)
    out = depth.data.copy()
    z, valid = ray_plane_depth_grid(plane, K)
    write = mask.bits & valid
    out[write] = z[write]
    replaced = int(write.sum())
    skipped = mask.area - replaced
    outcome = InstanceOutcome(mask.instance_id, plane, replaced, skipped)
    return RefinementResult(DepthMap(out, depth.scale), replaced, skipped, [outcome])


def fit_instance_plane(
    depth: DepthMap,
    mask: InstanceMask,
    K: CameraIntrinsics,
    *,
    band_width: float = DEFAULT_BAND_WIDTH,
    fit: RansacConfig = RansacConfig(),
    rule: str = "mean-projection",
    band_metric: str = "euclidean",
    exclude: Optional[np.ndarray] = None,
    workers: int = 1,
):
    """Estimate a mirror plane from the valid depths in the mask's border band.

    The normal comes from RANSAC over the back-projected band points; the
    offset is recomputed from the RANSAC inliers with ``rule``. Pixels in
    ``exclude`` (e.g. other mirrors) are dropped from the band.

    Returns:
        (plane, n_band_points, n_inliers)
    """
    _check_dims(depth, mask.shape, K)
    band = border_band(mask, band_width, band_metric).bits
    if exclude is not None:
        band &= ~exclude
    band &= depth.data > 0
    vs, us = np.nonzero(band)
    if len(vs) == 0:
        raise NoBorderPoints(f"instance {mask.instance_id}: border band holds no valid depth")
    pts = backproject_pixels(us, vs, depth.data[vs, us], K)
    fitted, inliers = ransac_plane(pts, fit, workers=workers)
    mv, mu = np.nonzero(mask.bits)
    plane = offset_from_border(
        fitted.normal, pts[inliers], rule, centroid_px=(float(mu.mean()), float(mv.mean())), K=K
    )
    return plane, len(pts), len(inliers)


def refine_frame(
    depth: DepthMap,
    instances: Sequence[tuple[InstanceMask, Union[Plane3D, str]]],
    K: CameraIntrinsics,
    *,
    band_width: float = DEFAULT_BAND_WIDTH,
    fit: RansacConfig = RansacConfig(),
    rule: str = "mean-projection",
    band_metric: str = "euclidean",
    workers: int = 1,
) -> RefinementResult:
    """Refine every mirror instance of one frame.

    ``"auto"`` planes are fitted from the *input* depth before any pixel is
    rewritten, so results do not depend on instance order. Planes are then
    applied in ``instance_id`` order; where masks overlap the later instance
    wins. A failing instance is recorded in ``result.instances`` with its
    error and leaves its pixels untouched; the others still run.
    """
    if depth.shape != K.shape:
        raise DimensionMismatch(f"depth {depth.shape} does not match intrinsics {K.shape}")
    for mask, _ in instances:
        _check_dims(depth, mask.shape, K)
    union = np.zeros(depth.shape, dtype=bool)
    for mask, _ in instances:
        union |= mask.bits

    ordered = sorted(instances, key=lambda item: item[0].instance_id)
    outcomes = []
    planes = []
    for mask, plane in ordered:
        outcome = InstanceOutcome(mask.instance_id)
        try:
            if isinstance(plane, str):
                if plane != AUTO:
                    raise ValueError(f"plane must be a Plane3D or {AUTO!r}, got {plane!r}")
                plane, outcome.band_points, outcome.inliers = fit_instance_plane(
                    depth,
                    mask,
                    K,
                    band_width=band_width,
                    fit=fit,
                    rule=rule,
                    band_metric=band_metric,
                    exclude=union & ~mask.bits,
                    workers=workers,
                )
            outcome.plane = plane
        except MirrorPlaneError as exc:
            outcome.error = exc
        outcomes.append(outcome)
        planes.append(plane if outcome.ok else None)

    out = depth.data.copy()
    replaced = skipped = 0
    for (mask, _), outcome, plane in zip(ordered, outcomes, planes):
        if plane is None:
            continue
        z, valid = ray_plane_depth_grid(plane, K)
        write = mask.bits & valid
        out[write] = z[write]
        outcome.replaced_px = int(write.sum())
        outcome.skipped_px = mask.area - outcome.replaced_px
        replaced += outcome.replaced_px
        skipped += outcome.skipped_px
    return RefinementResult(DepthMap(out, depth.scale), replaced, skipped, outcomes)
