import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirrorplane.errors import Degenerate, NoBorderPoints, NoConsensus, TooFewPoints
from mirrorplane.geometry import CameraIntrinsics, Plane3D, angle_between, canonicalize
from mirrorplane.plane_fit import (
    RansacConfig,
    _sample_triples,
    fit_plane_lstsq,
    offset_from_border,
    ransac_plane,
)

from conftest import random_unit


def points_on_plane(rng, plane, n, spread=1.0):
    nrm = np.asarray(plane.normal)
    t1 = np.cross(nrm, [1.0, 0.0, 0.0] if abs(nrm[0]) < 0.9 else [0.0, 1.0, 0.0])
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(nrm, t1)
    ab = rng.uniform(-spread, spread, size=(n, 2))
    return nrm * plane.offset + ab[:, :1] * t1 + ab[:, 1:] * t2


def test_config_validation():
    with pytest.raises(ValueError):
        RansacConfig(iterations=0)
    with pytest.raises(ValueError):
        RansacConfig(inlier_threshold=0.0)
    with pytest.raises(ValueError):
        RansacConfig(min_inliers=2)
    assert RansacConfig().resolved_min_inliers(20) == 10
    assert RansacConfig().resolved_min_inliers(101) == 21
    assert RansacConfig(min_inliers=3).resolved_min_inliers(1000) == 3


def test_sampled_triples_distinct():
    for n in (3, 4, 10, 1000):
        t = _sample_triples(n, 5000, 3)
        assert t.min() >= 0 and t.max() < n
        assert np.all((t[:, 0] != t[:, 1]) & (t[:, 0] != t[:, 2]) & (t[:, 1] != t[:, 2]))


def test_fifty_points_on_z3():
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(-1, 1, 50), rng.uniform(-1, 1, 50), np.full(50, 3.0)])
    fit = ransac_plane(pts)
    assert np.allclose(fit.plane.normal, (0, 0, -1), atol=1e-12)
    assert fit.plane.offset == pytest.approx(-3.0, abs=1e-12)
    assert len(fit.inliers) == 50


def test_outliers_in_unit_box():
    rng = np.random.default_rng(5)
    plane = Plane3D((0.0, 0.0, -1.0), -3.0)
    on = np.column_stack([rng.uniform(-0.5, 0.5, 50), rng.uniform(-0.5, 0.5, 50), np.full(50, 3.0)])
    out = rng.uniform(-0.5, 0.5, size=(20, 3)) + [0, 0, 3.0]
    pts = np.vstack([on, out])
    fit = ransac_plane(pts, RansacConfig(inlier_threshold=0.005))
    # oracle: least-squares plane through the known on-plane subset
    ref = fit_plane_lstsq(on)
    assert angle_between(fit.plane.normal, ref.normal) < 0.5
    assert angle_between(fit.plane.normal, plane.normal) < 0.5
    assert set(range(50)) <= set(fit.inliers.tolist())


def test_errors():
    with pytest.raises(TooFewPoints):
        ransac_plane(np.zeros((2, 3)))
    with pytest.raises(Degenerate):
        ransac_plane(np.array([[0.0, 0, 1], [1, 1, 2], [2, 2, 3]]), RansacConfig(min_inliers=3))
    rng = np.random.default_rng(2)
    with pytest.raises(NoConsensus):
        ransac_plane(rng.uniform(size=(200, 3)), RansacConfig(inlier_threshold=1e-6))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), data_seed=st.integers(0, 10_000))
def test_exact_recovery_any_seed(seed, data_seed):
    rng = np.random.default_rng(data_seed)
    plane = canonicalize(Plane3D(tuple(random_unit(rng)), rng.uniform(-5, 5)))
    pts = points_on_plane(rng, plane, 40)
    fit = ransac_plane(pts, RansacConfig(iterations=50, seed=seed))
    assert angle_between(fit.plane.normal, plane.normal) <= 1e-9 or np.allclose(fit.plane.normal, plane.normal, atol=1e-12)
    assert abs(fit.plane.offset - plane.offset) <= 1e-9
    assert len(fit.inliers) == 40


def test_inlier_count_monotone_in_threshold():
    rng = np.random.default_rng(8)
    pts = np.vstack([points_on_plane(rng, Plane3D((0.0, 0.0, -1.0), -2.0), 200) + rng.normal(0, 0.01, (200, 3)),
                     rng.uniform(-1, 1, (60, 3)) + [0, 0, 2]])
    prev = None
    for thr in (0.05, 0.03, 0.02, 0.01, 0.005):
        n = len(ransac_plane(pts, RansacConfig(inlier_threshold=thr, min_inliers=3, seed=1)).inliers)
        if prev is not None:
            assert n <= prev
        prev = n


def test_deterministic_across_workers():
    rng = np.random.default_rng(11)
    pts = np.vstack([points_on_plane(rng, Plane3D((0.3, 0.0, -math.sqrt(0.91)), -2.0), 300),
                     rng.uniform(-1, 1, (150, 3)) + [0, 0, 2]])
    pts += rng.normal(0, 0.002, pts.shape)
    cfg = RansacConfig(iterations=1000, inlier_threshold=0.005, seed=42)
    ref = ransac_plane(pts, cfg, workers=1)
    for w in (2, 3, 8):
        got = ransac_plane(pts, cfg, workers=w)
        assert got.plane == ref.plane and np.array_equal(got.inliers, ref.inliers)
    other = ransac_plane(pts, RansacConfig(iterations=1000, inlier_threshold=0.005, seed=43))
    assert angle_between(other.plane.normal, ref.plane.normal) < 1.0


def test_offset_rules_fronto(K):
    pts = np.array([[0.1, 0.2, 3.0], [-0.4, 0.1, 3.0], [0.0, -0.3, 3.0]])
    for rule in ("mean-projection", "mean-depth-centroid"):
        p = offset_from_border((0, 0, -1), pts, rule, centroid_px=(100.0, 50.0), K=K)
        assert p.offset == pytest.approx(-3.0, abs=1e-15)


def test_offset_mean_projection_two_depths():
    p = offset_from_border((0, 0, -1), [[0, 0, 2.0], [1, 1, 4.0]])
    assert p.offset == -3.0


def test_offset_mean_projection_is_least_squares(rng):
    s = 1 / math.sqrt(2)
    n = np.array([-s, 0.0, -s])
    pts = rng.uniform(-2, 2, size=(10, 3)) + [0, 0, 4]
    proj = pts @ n
    # 1-D least squares oracle: minimize sum((proj - d)^2) via normal equation on a column of ones
    d_ls = np.linalg.lstsq(np.ones((10, 1)), proj, rcond=None)[0][0]
    got = offset_from_border(n, pts)
    assert got.offset == pytest.approx(d_ls, abs=1e-12)
    for eps in (1e-3, -1e-3):
        assert np.sum((proj - got.offset) ** 2) <= np.sum((proj - got.offset - eps) ** 2)


def test_offset_centroid_rule_value():
    K = CameraIntrinsics(100.0, 100.0, 50.0, 50.0, 100, 100)
    n = np.array([0.6, 0.0, -0.8])
    pts = np.array([[0, 0, 2.0], [0, 0, 4.0]])
    got = offset_from_border(n, pts, "mean-depth-centroid", centroid_px=(60.0, 50.0), K=K)
    # centroid (60, 50) at z=3 back-projects to (0.3, 0, 3)
    assert got.offset == pytest.approx(0.6 * 0.3 - 0.8 * 3.0, abs=1e-12)


def test_offset_errors():
    with pytest.raises(NoBorderPoints):
        offset_from_border((0, 0, -1), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        offset_from_border((0, 0, -1), [[0, 0, 1.0]], "median")
    with pytest.raises(ValueError):
        offset_from_border((0, 0, -1), [[0, 0, 1.0]], "mean-depth-centroid")
