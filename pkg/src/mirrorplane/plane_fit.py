"""Mirror-plane estimation from border-band points.

RANSAC proposes planes from random point triples, keeps the hypothesis with
the most inliers and refits it by total least squares on that consensus set.
The plane offset can then be re-derived from the border points with either of
two averaging rules (see :func:`offset_from_border`).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import defaults
from .errors import Degenerate, NoBorderPoints, NoConsensus, NonUnitInput, TooFewPoints
from .geometry import CameraIntrinsics, Plane3D, backproject, canonicalize
from .anchors import AnchorCode, AnchorCodebook, build_codebook, decode_normal, encode_normal  # noqa: F401  (codebook half of plane estimation)

OFFSET_RULES = ("mean-projection", "mean-depth-centroid")
_CHUNK = 128
_COLLINEAR_EPS = 1e-9


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = defaults.RANSAC_ITERATIONS
    inlier_threshold: float = defaults.RANSAC_THRESHOLD
    min_inliers: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be positive")
        if self.min_inliers is not None and self.min_inliers < 3:
            raise ValueError("min_inliers must be >= 3")

    def resolved_min_inliers(self, n_points: int) -> int:
        """Explicit value, else ``max(10, ceil(20% of points))``."""
        if self.min_inliers is not None:
            return self.min_inliers
        return max(10, math.ceil(0.2 * n_points))


class RansacFit(NamedTuple):
    plane: Plane3D
    inliers: np.ndarray


def _sample_triples(n: int, iterations: int, seed: int) -> np.ndarray:
    # Drawn up front from one seeded stream so the hypotheses do not depend on
    # how the evaluation is split across workers.
    rng = np.random.default_rng(seed)
    i0 = rng.integers(0, n, iterations)
    i1 = rng.integers(0, n - 1, iterations)
    i1 = i1 + (i1 >= i0)
    i2 = rng.integers(0, n - 2, iterations)
    lo, hi = np.minimum(i0, i1), np.maximum(i0, i1)
    i2 = i2 + (i2 >= lo)
    i2 = i2 + (i2 >= hi)
    return np.stack([i0, i1, i2], axis=1)


def _score_chunk(pts: np.ndarray, triples: np.ndarray, threshold: float):
    p0, p1, p2 = pts[triples[:, 0]], pts[triples[:, 1]], pts[triples[:, 2]]
    v1, v2 = p1 - p0, p2 - p0
    cross = np.cross(v1, v2)
    norm = np.linalg.norm(cross, axis=1)
    scale = np.linalg.norm(v1, axis=1) * np.linalg.norm(v2, axis=1)
    ok = norm > _COLLINEAR_EPS * scale
    normals = np.zeros_like(cross)
    normals[ok] = cross[ok] / norm[ok, None]
    offsets = np.einsum("ij,ij->i", normals, p0)
    dist = normals @ pts.T  # (hypotheses, points)
    dist -= offsets[:, None]
    np.abs(dist, out=dist)
    inl = dist <= threshold
    counts = np.count_nonzero(inl, axis=1)
    counts[~ok] = -1
    dist[~inl] = 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        rms = np.sqrt(np.einsum("ij,ij->i", dist, dist) / counts)
    rms[~ok] = np.inf
    return counts, rms, normals, offsets


def fit_plane_lstsq(points: np.ndarray) -> Plane3D:
    """Total-least-squares plane through ``points`` (orthogonal distances)."""
    pts = np.asarray(points, dtype=np.float64)
    centroid = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    normal = vt[-1]
    return canonicalize(Plane3D(tuple(normal), float(normal @ centroid)))


def ransac_plane(points, cfg: RansacConfig = RansacConfig(), workers: int = 1) -> RansacFit:
    """Fit a plane to 3D points with RANSAC.

    The winning hypothesis has the most inliers (distance <= threshold); ties
    go to the smaller inlier RMS distance, then to the earlier iteration. The
    returned plane is the least-squares refit on that inlier set, canonicalized;
    the returned indices are that set, sorted. The result depends only on
    ``points`` and ``cfg``; ``workers`` changes nothing but wall time.

    Raises:
        TooFewPoints: fewer than 3 points.
        Degenerate: every sampled triple was collinear.
        NoConsensus: best inlier count below the configured minimum.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if n < 3:
        raise TooFewPoints(f"need at least 3 points, got {n}")
    triples = _sample_triples(n, cfg.iterations, cfg.seed)
    chunks = [triples[i : i + _CHUNK] for i in range(0, len(triples), _CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scored = list(pool.map(lambda c: _score_chunk(pts, c, cfg.inlier_threshold), chunks))
    else:
        scored = [_score_chunk(pts, c, cfg.inlier_threshold) for c in chunks]
    counts = np.concatenate([s[0] for s in scored])
    rms = np.concatenate([s[1] for s in scored])
    normals = np.concatenate([s[2] for s in scored])
    offsets = np.concatenate([s[3] for s in scored])
    if counts.max() < 0:
        raise Degenerate("all sampled point triples are collinear")
    # lexsort keys: last is primary; stable, so equal keys keep iteration order
    best = np.lexsort((rms, -counts))[0]
    need = cfg.resolved_min_inliers(n)
    if counts[best] < need:
        raise NoConsensus(f"best plane has {counts[best]} inliers, need {need}")
    dist = np.abs(pts @ normals[best] - offsets[best])
    inliers = np.flatnonzero(dist <= cfg.inlier_threshold)
    return RansacFit(fit_plane_lstsq(pts[inliers]), inliers)


def offset_from_border(
    normal: Sequence[float],
    border_points,
    rule: str = "mean-projection",
    *,
    centroid_px: Optional[tuple[float, float]] = None,
    K: Optional[CameraIntrinsics] = None,
) -> Plane3D:
    """Plane with the given normal whose offset is averaged from border points.

    ``mean-projection``: ``d = mean(n . p_i)``, the least-squares offset for a
    fixed normal. ``mean-depth-centroid``: back-project the mask centroid pixel
    ``centroid_px`` at the mean border depth and take ``d = n . p0``; needs
    ``centroid_px`` and ``K``.
    """
    n = np.asarray(normal, dtype=np.float64)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise NonUnitInput(f"normal must be a unit 3-vector, got {n.tolist()}")
    pts = np.asarray(border_points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise NoBorderPoints("no border points to estimate the plane offset from")
    if rule == "mean-projection":
        d = float(np.mean(pts @ n))
    elif rule == "mean-depth-centroid":
        if centroid_px is None or K is None:
            raise ValueError("mean-depth-centroid needs centroid_px and K")
        p0 = backproject(centroid_px[0], centroid_px[1], float(np.mean(pts[:, 2])), K)
        d = float(n @ np.asarray(p0))
    else:
        raise ValueError(f"unknown offset rule {rule!r}; expected one of {OFFSET_RULES}")
    return canonicalize(Plane3D(tuple(n), d))
