"""Anchor-normal codebook: k-means over mirror normals, encode/decode.

A normal is encoded as the index of its nearest anchor (by angle) plus the
raw 3-vector residual ``n - anchor``; decoding sums them and renormalizes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import defaults
from .errors import BadAnchorId, EmptyCluster, NonUnitInput, TooFewNormals, ZeroSum
from .geometry import UNIT_ULPS, canonical_sign

DEFAULT_K = defaults.ANCHOR_COUNT
MAX_ITER = 100
MOVE_TOL = 1e-9
MAX_RESEEDS = 3
_ZERO_SUM_EPS = 1e-12


@dataclass
class AnchorCodebook:
    anchors: np.ndarray
    seed: int = 0
    distortions: list[float] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.anchors = np.asarray(self.anchors, dtype=np.float64).reshape(-1, 3)
        if len(self.anchors) < 1:
            raise ValueError("codebook needs at least one anchor")

    @property
    def k(self) -> int:
        return len(self.anchors)

    def to_dict(self) -> dict:
        return {"k": self.k, "anchors": self.anchors.tolist(), "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "AnchorCodebook":
        cb = cls(np.asarray(data["anchors"], dtype=np.float64), int(data.get("seed", 0)))
        if cb.k != int(data["k"]):
            raise ValueError(f"codebook declares k={data['k']} but lists {cb.k} anchors")
        return cb

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "AnchorCodebook":
        return cls.from_dict(json.loads(Path(path).read_text()))


class AnchorCode(NamedTuple):
    anchor_id: int
    residual: np.ndarray


class KMeansResult(NamedTuple):
    centroids: np.ndarray
    labels: np.ndarray
    distortions: list[float]
    iterations: int


def _check_unit(vectors: np.ndarray, tol: float = 1e-6) -> None:
    norms = np.linalg.norm(vectors, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise NonUnitInput("normals must be unit vectors")


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [points[rng.integers(len(points))]]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(len(points), p=d2 / total)
        else:
            idx = rng.integers(len(points))
        centers.append(points[idx])
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return np.array(centers)


def _assign(points: np.ndarray, centers: np.ndarray, spherical: bool):
    if spherical:
        sim = points @ centers.T
        labels = np.argmax(sim, axis=1)
    else:
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
    resid = points - centers[labels]
    return labels, np.sum(resid * resid, axis=1)


def lloyd_kmeans(
    points, k: int, seed: int = 0, *, spherical: bool = False, max_iter: int = MAX_ITER, tol: float = MOVE_TOL
) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding.

    ``distortions[i]`` is the sum of squared distances after the i-th
    assignment step. An emptied cluster is re-seeded at the point farthest
    from its centroid; more than ``MAX_RESEEDS`` re-seeds raise EmptyCluster.
    With ``spherical`` the centroids are renormalized every iteration and
    points are assigned by cosine similarity.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(pts, k, rng)
    if spherical:
        centers = centers / np.linalg.norm(centers, axis=1, keepdims=True)
    distortions = []
    reseeds = 0
    it = 0
    labels, sq = _assign(pts, centers, spherical)
    for it in range(1, max_iter + 1):
        distortions.append(float(sq.sum()))
        new = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new[j] = pts[members].mean(axis=0)
            else:
                reseeds += 1
                if reseeds > MAX_RESEEDS:
                    raise EmptyCluster(f"cluster {j} stayed empty after {MAX_RESEEDS} re-seeds")
                far = int(np.argmax(sq))
                new[j] = pts[far]
                sq[far] = 0.0
        if spherical:
            norms = np.linalg.norm(new, axis=1, keepdims=True)
            new = np.where(norms > 0, new / np.where(norms > 0, norms, 1.0), centers)
        moved = float(np.max(np.linalg.norm(new - centers, axis=1)))
        centers = new
        labels, sq = _assign(pts, centers, spherical)
        if moved < tol:
            break
    distortions.append(float(sq.sum()))
    return KMeansResult(centers, labels, distortions, it)


def build_codebook(normals, k: int = DEFAULT_K, seed: int = 0, *, spherical: bool = False) -> AnchorCodebook:
    """Cluster unit normals into ``k`` anchors (unit length, canonical sign)."""
    pts = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    _check_unit(pts)
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(np.unique(pts, axis=0)) < k:
        raise TooFewNormals(f"need at least {k} distinct normals, got {len(np.unique(pts, axis=0))}")
    result = lloyd_kmeans(pts, k, seed, spherical=spherical)
    anchors = []
    for c in result.centroids:
        norm = np.linalg.norm(c)
        if norm < _ZERO_SUM_EPS:
            raise EmptyCluster("a centroid collapsed to the origin")
        anchors.append(canonical_sign(c if abs(norm - 1.0) <= UNIT_ULPS else c / norm))
    return AnchorCodebook(np.array(anchors), seed, result.distortions)


def nearest_anchor(vec: Sequence[float], cb: AnchorCodebook) -> int:
    """Index of the anchor at the smallest angle from ``vec`` (ties: lowest)."""
    v = np.asarray(vec, dtype=np.float64)
    cos = (cb.anchors @ v) / (np.linalg.norm(cb.anchors, axis=1) * np.linalg.norm(v))
    angles = np.arccos(np.clip(cos, -1.0, 1.0))
    return int(np.argmin(angles))


def encode_normal(n: Sequence[float], cb: AnchorCodebook) -> AnchorCode:
    v = np.asarray(n, dtype=np.float64)
    _check_unit(v)
    idx = nearest_anchor(v, cb)
    return AnchorCode(idx, v - cb.anchors[idx])


def decode_normal(code: AnchorCode, cb: AnchorCodebook) -> np.ndarray:
    idx = int(code.anchor_id)
    if not 0 <= idx < cb.k:
        raise BadAnchorId(f"anchor id {idx} outside [0, {cb.k})")
    total = cb.anchors[idx] + np.asarray(code.residual, dtype=np.float64)
    norm = float(np.linalg.norm(total))
    if norm < _ZERO_SUM_EPS:
        raise ZeroSum("anchor and residual cancel out")
    return canonical_sign(total if abs(norm - 1.0) <= UNIT_ULPS else total / norm)
