"""Masked depth metrics with a mirror / other / all breakdown."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from ..errors import AllZeroPred, DimensionMismatch, EmptyRegion, EmptyValidSet
from ..imaging import DepthMap
from .. import defaults
from .ssim import global_ssim, ssim_map

MIN_GT = defaults.MIN_GT_DEPTH
DELTA_THRESHOLDS = defaults.DELTA_THRESHOLDS
REGIONS = ("mirror", "other", "all")


def _arr(x) -> np.ndarray:
    if isinstance(x, DepthMap):
        x = x.data
    return np.asarray(x, dtype=np.float64)


def _select(pred, gt, region):
    p, g = _arr(pred), _arr(gt)
    if p.shape != g.shape:
        raise DimensionMismatch(f"pred {p.shape} vs gt {g.shape}")
    if region is not None:
        r = np.asarray(getattr(region, "bits", region), dtype=bool)
        if r.shape != p.shape:
            raise DimensionMismatch(f"region {r.shape} vs maps {p.shape}")
        p, g = p[r], g[r]
    p, g = p.ravel(), g.ravel()
    if p.size == 0:
        raise EmptyRegion("metric region is empty")
    return p, g


def rmse(pred, gt, region=None) -> float:
    p, g = _select(pred, gt, region)
    diff = g - p
    return math.sqrt(float(np.mean(diff * diff)))


def optimal_scale(pred, gt, region=None) -> float:
    """Least-squares ``s`` minimizing ``sum((gt - s * pred)^2)``."""
    p, g = _select(pred, gt, region)
    denom = float(np.sum(p * p))
    if denom == 0.0:
        raise AllZeroPred("scale-invariant RMSE needs a nonzero prediction")
    return float(np.sum(g * p)) / denom


def s_rmse(pred, gt, region=None) -> float:
    p, g = _select(pred, gt, region)
    s = optimal_scale(p, g)
    diff = g - s * p
    return math.sqrt(float(np.mean(diff * diff)))


def abs_rel(pred, gt, region=None) -> float:
    p, g = _select(pred, gt, region)
    return float(np.mean(np.abs(g - p) / g))


def delta(pred, gt, region=None, threshold: float = 1.25) -> float:
    """Fraction of pixels with ``max(gt/pred, pred/gt) < threshold``.

    Pixels with ``pred <= 0`` fail.
    """
    p, g = _select(pred, gt, region)
    ok = p > 0
    ratio = np.full(p.shape, np.inf)
    ratio[ok] = np.maximum(g[ok] / p[ok], p[ok] / g[ok])
    return float(np.count_nonzero(ratio < threshold)) / p.size


@dataclass
class RegionMetrics:
    rmse: float
    s_rmse: Optional[float]
    abs_rel: float
    ssim: float
    delta: dict[float, float]
    evaluated_px: int

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "s_rmse": self.s_rmse,
            "abs_rel": self.abs_rel,
            "ssim": self.ssim,
            "delta": {repr(k): v for k, v in self.delta.items()},
            "evaluated_px": self.evaluated_px,
        }


@dataclass
class MetricReport:
    """Per-region metrics; a region with no evaluated pixels maps to None."""

    regions: dict[str, Optional[RegionMetrics]]
    evaluated_px: dict[str, int]
    frames: int = 1
    frame_errors: list[dict] = field(default_factory=list)

    def __getitem__(self, region: str) -> Optional[RegionMetrics]:
        return self.regions[region]

    def to_dict(self) -> dict:
        out = {name: (m.to_dict() if m is not None else None) for name, m in self.regions.items()}
        out["evaluated_px"] = dict(self.evaluated_px)
        out["frames"] = self.frames
        if self.frame_errors:
            out["frame_errors"] = list(self.frame_errors)
        return out


def _region_masks(gt: np.ndarray, mirror: Optional[np.ndarray], min_gt: float) -> dict[str, np.ndarray]:
    valid = gt > min_gt
    if mirror is None:
        mirror = np.zeros(gt.shape, dtype=bool)
    return {"mirror": valid & mirror, "other": valid & ~mirror, "all": valid}


def _mirror_bits(mirror_mask, shape) -> Optional[np.ndarray]:
    if mirror_mask is None:
        return None
    if isinstance(mirror_mask, (list, tuple)):
        bits = np.zeros(shape, dtype=bool)
        for m in mirror_mask:
            bits |= np.asarray(getattr(m, "bits", m), dtype=bool)
        return bits
    bits = np.asarray(getattr(mirror_mask, "bits", mirror_mask), dtype=bool)
    if bits.shape != shape:
        raise DimensionMismatch(f"mask {bits.shape} vs maps {shape}")
    return bits


class DepthAccumulator:
    """Pools per-region pixels over frames; :meth:`report` finalizes once.

    Frames are kept in insertion order so the pooled sums are reproducible.
    """

    def __init__(self, min_gt: float = MIN_GT, ssim_window: str = "gaussian"):
        self.min_gt = min_gt
        self.ssim_window = ssim_window
        self._pred = {r: [] for r in REGIONS}
        self._gt = {r: [] for r in REGIONS}
        self._ssim = {r: [] for r in REGIONS}
        self.frames = 0

    def add(self, pred, gt, mirror_mask=None) -> dict[str, int]:
        p, g = _arr(pred), _arr(gt)
        if p.shape != g.shape:
            raise DimensionMismatch(f"pred {p.shape} vs gt {g.shape}")
        regions = _region_masks(g, _mirror_bits(mirror_mask, g.shape), self.min_gt)
        if not regions["all"].any():
            raise EmptyValidSet(f"no pixel has ground truth depth > {self.min_gt}")
        counts = {}
        for name, region in regions.items():
            counts[name] = int(region.sum())
            if not counts[name]:
                continue
            self._pred[name].append(p[region])
            self._gt[name].append(g[region])
            if self.ssim_window == "global":
                self._ssim[name].append(np.array([global_ssim(p, g, region)]))
            else:
                self._ssim[name].append(ssim_map(p, g, region)[region])
        self.frames += 1
        return counts

    def merge(self, other: "DepthAccumulator") -> "DepthAccumulator":
        """Append ``other``'s frames after this one's (in place)."""
        for name in REGIONS:
            self._pred[name].extend(other._pred[name])
            self._gt[name].extend(other._gt[name])
            self._ssim[name].extend(other._ssim[name])
        self.frames += other.frames
        return self

    def report(self) -> MetricReport:
        regions: dict[str, Optional[RegionMetrics]] = {}
        counts: dict[str, int] = {}
        for name in REGIONS:
            if not self._pred[name]:
                regions[name], counts[name] = None, 0
                continue
            p = np.concatenate(self._pred[name])
            g = np.concatenate(self._gt[name])
            try:
                srm = s_rmse(p, g)
            except AllZeroPred:
                srm = None
            regions[name] = RegionMetrics(
                rmse=rmse(p, g),
                s_rmse=srm,
                abs_rel=abs_rel(p, g),
                ssim=float(np.mean(np.concatenate(self._ssim[name]))),
                delta={t: delta(p, g, threshold=t) for t in DELTA_THRESHOLDS},
                evaluated_px=int(p.size),
            )
            counts[name] = int(p.size)
        return MetricReport(regions, counts, self.frames)


def eval_depth(pred, gt, mirror_mask=None, min_gt: float = MIN_GT, ssim_window: str = "gaussian") -> MetricReport:
    """Evaluate one frame on pixels with ground truth above ``min_gt``.

    ``mirror_mask`` may be a single mask or a list of instance masks (their
    union is the mirror region).

    Raises:
        DimensionMismatch: shapes disagree.
        EmptyValidSet: no pixel passes the validity filter.
    """
    acc = DepthAccumulator(min_gt, ssim_window)
    acc.add(pred, gt, mirror_mask)
    return acc.report()


def mean_of_reports(reports: Iterable[MetricReport]) -> MetricReport:
    """Average per-frame reports (per-frame mode); absent regions are skipped."""
    reports = list(reports)
    regions: dict[str, Optional[RegionMetrics]] = {}
    counts: dict[str, int] = {}
    for name in REGIONS:
        present = [r.regions[name] for r in reports if r.regions.get(name) is not None]
        counts[name] = sum(m.evaluated_px for m in present)
        if not present:
            regions[name] = None
            continue
        srm = [m.s_rmse for m in present if m.s_rmse is not None]
        regions[name] = RegionMetrics(
            rmse=float(np.mean([m.rmse for m in present])),
            s_rmse=float(np.mean(srm)) if srm else None,
            abs_rel=float(np.mean([m.abs_rel for m in present])),
            ssim=float(np.mean([m.ssim for m in present])),
            delta={t: float(np.mean([m.delta[t] for m in present])) for t in DELTA_THRESHOLDS},
            evaluated_px=counts[name],
        )
    return MetricReport(regions, counts, len(reports))
