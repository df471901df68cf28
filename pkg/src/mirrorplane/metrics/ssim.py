"""Structural similarity on depth maps, restricted to a pixel region.

Local means/variances use a Gaussian window in which pixels outside the
region get zero weight and the remaining weights are renormalized, so values
outside the region (invalid depth, the other region) never leak into the
statistics. The score is the mean of the per-pixel SSIM over the region.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy import ndimage

from .. import defaults
from ..errors import DimensionMismatch, EmptyRegion

C1 = defaults.SSIM_C1
C2 = defaults.SSIM_C2
WINDOW_SIZE = defaults.SSIM_WINDOW
WINDOW_SIGMA = defaults.SSIM_SIGMA


def gaussian_window(size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_formula(mu_x, mu_y, var_x, var_y, cov_xy, c1: float, c2: float):
    # Written so that x == y gives numerator == denominator bit-for-bit.
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def ssim_map(
    pred,
    gt,
    region: Optional[np.ndarray] = None,
    *,
    size: int = WINDOW_SIZE,
    sigma: float = WINDOW_SIGMA,
    c1: float = C1,
    c2: float = C2,
) -> np.ndarray:
    """Per-pixel SSIM (NaN outside ``region``)."""
    x = np.asarray(gt, dtype=np.float64)
    y = np.asarray(pred, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatch(f"pred {y.shape} vs gt {x.shape}")
    m = np.ones(x.shape, dtype=bool) if region is None else np.asarray(region, dtype=bool)
    if m.shape != x.shape:
        raise DimensionMismatch(f"region {m.shape} vs maps {x.shape}")
    if not m.any():
        raise EmptyRegion("SSIM region is empty")
    w = gaussian_window(size, sigma)
    mf = m.astype(np.float64)
    # zero out-of-region values so NaN/inf there cannot propagate
    x = np.where(m, x, 0.0)
    y = np.where(m, y, 0.0)

    def filt(a):
        return ndimage.correlate(a, w, mode="constant", cval=0.0)

    weight = filt(mf)
    safe = np.where(m, weight, 1.0)
    mu_x = filt(mf * x) / safe
    mu_y = filt(mf * y) / safe
    # second moments on region-mean-shifted data: same values in exact
    # arithmetic, far less cancellation when depths sit far from zero
    sx = np.where(m, x - x[m].mean(), 0.0)
    sy = np.where(m, y - y[m].mean(), 0.0)
    mx = filt(mf * sx) / safe
    my = filt(mf * sy) / safe
    var_x = filt(mf * sx * sx) / safe - mx * mx
    var_y = filt(mf * sy * sy) / safe - my * my
    cov = filt(mf * sx * sy) / safe - mx * my
    out = _ssim_formula(mu_x, mu_y, var_x, var_y, cov, c1, c2)
    return np.where(m, out, np.nan)


def ssim(pred, gt, region: Optional[np.ndarray] = None, *, window: str = "gaussian", **kwargs) -> float:
    """Mean SSIM over ``region``.

    ``window="gaussian"`` (default) uses the 11x11, sigma 1.5 masked window;
    ``window="global"`` evaluates the formula once with the statistics of the
    whole region.
    """
    if window == "gaussian":
        smap = ssim_map(pred, gt, region, **kwargs)
        return float(np.nanmean(smap))
    if window == "global":
        return global_ssim(pred, gt, region, **kwargs)
    raise ValueError(f"unknown SSIM window {window!r}")


def global_ssim(pred, gt, region: Optional[np.ndarray] = None, *, c1: float = C1, c2: float = C2) -> float:
    x = np.asarray(gt, dtype=np.float64)
    y = np.asarray(pred, dtype=np.float64)
    if region is not None:
        m = np.asarray(region, dtype=bool)
        x, y = x[m], y[m]
    x, y = x.ravel(), y.ravel()
    if x.size == 0:
        raise EmptyRegion("SSIM region is empty")
    mu_x, mu_y = x.mean(), y.mean()
    dx, dy = x - mu_x, y - mu_y
    return float(_ssim_formula(mu_x, mu_y, np.mean(dx * dx), np.mean(dy * dy), np.mean(dx * dy), c1, c2))
