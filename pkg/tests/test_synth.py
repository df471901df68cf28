import numpy as np
import pytest

from mirrorplane.errors import CameraOutsideRoom
from mirrorplane.geometry import backproject, camera_side
from mirrorplane.imaging import border_band
from mirrorplane.synth import (
    MirrorSpec,
    SceneOptions,
    SceneSpec,
    corrupt,
    default_intrinsics,
    random_scene,
    render_gt,
    virtual_depth,
)


def fronto_spec(**kw):
    K = default_intrinsics(64, 48)
    mirror = MirrorSpec("+z", (0.0, 0.0, 3.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), 0.4, 0.3)
    return SceneSpec(K=K, room_min=(-4.0, -3.0, -1.0), room_max=(4.0, 3.0, 3.0), mirror=mirror, **kw)


def test_fronto_mirror_constant_depth():
    gt = render_gt(fronto_spec())
    assert gt.mask.area > 0
    assert np.all(gt.depth.data[gt.mask.bits] == 3.0)
    assert gt.plane.normal == (0.0, 0.0, -1.0) and gt.plane.offset == -3.0


def test_mask_points_on_plane():
    for seed in range(10):
        spec = random_scene(seed)
        gt = render_gt(spec)
        n = np.asarray(gt.plane.normal)
        vs, us = np.nonzero(gt.mask.bits)
        for v, u in list(zip(vs, us))[::17]:
            p = np.asarray(backproject(u, v, gt.depth.data[v, u], spec.K))
            assert abs(n @ p - gt.plane.offset) <= 1e-9 * max(1.0, abs(gt.plane.offset))


def test_mirror_outside_frustum():
    spec = fronto_spec()
    behind = SceneSpec(
        K=spec.K,
        room_min=spec.room_min,
        room_max=spec.room_max,
        mirror=MirrorSpec("-z", (0.0, 0.0, -1.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), 0.4, 0.3),
    )
    gt = render_gt(behind)
    assert gt.mask.area == 0
    assert np.all(gt.depth.data > 0) and np.all(np.isfinite(gt.depth.data))


def test_camera_outside_room():
    with pytest.raises(CameraOutsideRoom):
        render_gt(fronto_spec(camera_position=(0.0, 0.0, 5.0)))


def test_spec_validation():
    with pytest.raises(ValueError):
        fronto_spec(outlier_fraction=1.5)
    K = default_intrinsics(64, 48)
    with pytest.raises(ValueError):
        SceneSpec(K=K, room_min=(-2.0, -1.5, -1.0), room_max=(2.0, 1.5, 3.0),
                  mirror=MirrorSpec("+z", (0.0, 0.0, 2.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), 0.4, 0.3))


def test_spec_json_round_trip(tmp_path):
    spec = random_scene(4, options=SceneOptions(noise_sigma=0.01))
    spec.save(tmp_path / "s.json")
    assert SceneSpec.load(tmp_path / "s.json") == spec


def test_behind_plane_strictly_behind():
    for seed in range(10):
        spec = random_scene(seed)
        gt = render_gt(spec)
        noisy = corrupt(gt.depth, gt.mask, gt.plane, spec)
        n, d = np.asarray(gt.plane.normal), gt.plane.offset
        side = camera_side(gt.plane)
        vs, us = np.nonzero(gt.mask.bits)
        for v, u in zip(vs, us):
            p = np.asarray(backproject(u, v, noisy.data[v, u], spec.K))
            assert side * (n @ p - d) < 0
            assert noisy.data[v, u] > gt.depth.data[v, u]


def test_virtual_depth_matches_mirror_image():
    spec = fronto_spec()
    gt = render_gt(spec)
    virt = virtual_depth(gt.depth, gt.mask, gt.plane, spec)
    # fronto mirror on z=3 facing a wall at z=-1: straight back along the axis
    # the reflected ray travels 4 m, so the virtual point sits at z = 3 + 4
    v, u = int(round(spec.K.cy)), int(round(spec.K.cx))
    assert gt.mask.bits[v, u]
    assert virt[v, u] == pytest.approx(7.0, abs=0.2)


def test_dropout_modes():
    spec = fronto_spec(corruption="dropout", outlier_fraction=1.0)
    gt = render_gt(spec)
    noisy = corrupt(gt.depth, gt.mask, gt.plane, spec)
    assert np.all(noisy.data[gt.mask.bits] == 0)
    clean = fronto_spec(corruption="dropout", outlier_fraction=0.0)
    out = corrupt(gt.depth, gt.mask, gt.plane, clean)
    assert np.array_equal(out.data, gt.depth.data)
    half = fronto_spec(corruption="mixed", outlier_fraction=0.5, seed=3)
    mixed = corrupt(gt.depth, gt.mask, gt.plane, half).data[gt.mask.bits]
    assert 0 < np.count_nonzero(mixed == 0) < len(mixed)
    assert np.all(mixed[mixed > 0] > 3.0)


def test_noise_only_touches_band():
    spec = fronto_spec(corruption="dropout", noise_sigma=0.01, band_outlier_fraction=0.2, seed=9)
    gt = render_gt(spec)
    out = corrupt(gt.depth, gt.mask, gt.plane, spec)
    band = border_band(gt.mask, spec.border_width).bits
    untouched = ~band & ~gt.mask.bits
    assert np.array_equal(out.data[untouched], gt.depth.data[untouched])
    assert np.count_nonzero(out.data[band] != gt.depth.data[band]) == np.count_nonzero(band)


def test_deterministic_per_seed():
    a, b = random_scene(12), random_scene(12)
    assert a == b
    ga = render_gt(a)
    opts = SceneOptions(noise_sigma=0.005, band_outlier_fraction=0.2)
    s1, s2 = random_scene(12, options=opts), random_scene(12, options=opts)
    n1 = corrupt(ga.depth, ga.mask, ga.plane, s1)
    n2 = corrupt(ga.depth, ga.mask, ga.plane, s2)
    assert np.array_equal(n1.data, n2.data)


def test_random_scene_band_on_mirror_wall():
    for seed in range(20):
        spec = random_scene(seed)
        gt = render_gt(spec)
        assert gt.mask.area >= 200
        band = border_band(gt.mask, 25).bits
        # band pixels lie on the mirror's wall plane
        n = np.asarray(gt.plane.normal)
        vs, us = np.nonzero(band)
        pts = np.column_stack([(us - spec.K.cx) / spec.K.fx, (vs - spec.K.cy) / spec.K.fy, np.ones(len(us))])
        pts *= gt.depth.data[vs, us][:, None]
        assert np.max(np.abs(pts @ n - gt.plane.offset)) < 1e-9
