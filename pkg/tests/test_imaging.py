import json

import numpy as np
import png
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mirrorplane.errors import BadFormat, DimensionMismatch, EmptyMask
from mirrorplane.geometry import CameraIntrinsics
from mirrorplane.imaging import (
    DepthMap,
    IndexEntry,
    InstanceMask,
    PointCloud,
    border_band,
    iou,
    read_depth,
    read_depth_raw,
    read_index,
    read_mask,
    to_pointcloud,
    write_depth,
    write_depth_raw,
    write_index,
    write_mask,
    write_ply,
)

from oracles import band_brute_force


def _raw_png(path, arr, bitdepth=16, greyscale=True):
    h, w = arr.shape[:2]
    writer = png.Writer(width=w, height=h, greyscale=greyscale, bitdepth=bitdepth)
    rows = arr.reshape(h, -1).tolist()
    with open(path, "wb") as fh:
        writer.write(fh, rows)


def test_read_depth_scales(tmp_path):
    path = tmp_path / "d.png"
    _raw_png(path, np.array([[4000, 0], [2000, 65535]], dtype=np.uint16))
    d = read_depth(path, 4000)
    assert d.data[0, 0] == 1.0 and d.data[0, 1] == 0.0 and d.data[1, 0] == 0.5
    assert d.shape == (2, 2) and d.scale == 4000


def test_depth_round_trip_byte_identical(tmp_path, rng):
    for scale in (1000, 4000, 5000):
        raw = rng.integers(0, 65536, size=(7, 11), dtype=np.uint16)
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        write_depth_raw(a, raw)
        write_depth(b, read_depth(a, scale))
        assert a.read_bytes() == b.read_bytes()
        assert np.array_equal(read_depth_raw(b), raw)


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint16, st.tuples(st.integers(1, 6), st.integers(1, 6))), st.sampled_from([1000.0, 4000.0, 1.0, 257.0]))
def test_depth_io_lossless_property(tmp_path_factory, raw, scale):
    path = tmp_path_factory.mktemp("d") / "x.png"
    write_depth_raw(path, raw)
    again = tmp_path_factory.mktemp("d") / "y.png"
    write_depth(again, read_depth(path, scale))
    assert np.array_equal(read_depth_raw(again), raw)


def test_read_depth_rejects_wrong_format(tmp_path):
    eight = tmp_path / "m.png"
    _raw_png(eight, np.zeros((3, 3), dtype=np.uint8), bitdepth=8)
    with pytest.raises(BadFormat):
        read_depth(eight)
    rgb = tmp_path / "rgb.png"
    _raw_png(rgb, np.zeros((3, 3, 3), dtype=np.uint16), greyscale=False)
    with pytest.raises(BadFormat):
        read_depth(rgb)
    junk = tmp_path / "junk.png"
    junk.write_bytes(b"not a png")
    with pytest.raises(BadFormat):
        read_depth(junk)
    with pytest.raises(OSError):
        read_depth(tmp_path / "missing.png")


def test_depth_map_validation():
    with pytest.raises(ValueError):
        DepthMap(np.array([[-1.0]]))
    with pytest.raises(ValueError):
        DepthMap(np.array([[np.nan]]))


def test_write_depth_overflow(tmp_path):
    with pytest.raises(ValueError):
        write_depth(tmp_path / "x.png", DepthMap(np.array([[70.0]]), 1000))


def test_mask_round_trip(tmp_path, rng):
    bits = rng.random((9, 13)) < 0.4
    path = tmp_path / "m.png"
    write_mask(path, bits)
    m = read_mask(path, 7)
    assert m.instance_id == 7 and np.array_equal(m.bits, bits)
    # any nonzero value marks the instance
    _raw_png(path, np.array([[0, 1], [128, 0]], dtype=np.uint8), bitdepth=8)
    assert read_mask(path).bits.tolist() == [[False, True], [True, False]]


def test_index_resolves_relative_paths(tmp_path):
    sub = tmp_path / "frame"
    sub.mkdir()
    write_index(sub / "index.json", [IndexEntry(3, "m3.png", None), IndexEntry(1, "m1.png", "p1.json")])
    rows = json.loads((sub / "index.json").read_text())
    assert rows[0] == {"instance_id": 3, "mask_path": "m3.png", "plane_path": None}
    entries = read_index(sub / "index.json")
    assert entries[0].mask_path == str(sub / "m3.png") and entries[0].plane_path is None
    assert entries[1].plane_path == str(sub / "p1.json")


def test_band_single_pixel_width_one():
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 2] = True
    band = border_band(mask, 1).bits
    assert set(map(tuple, np.argwhere(band))) == {(1, 2), (3, 2), (2, 1), (2, 3)}


def test_band_full_mask_is_empty():
    assert not border_band(np.ones((6, 4), dtype=bool), 25).bits.any()


def test_band_empty_mask_raises():
    with pytest.raises(EmptyMask):
        border_band(np.zeros((4, 4), dtype=bool), 3)
    with pytest.raises(ValueError):
        border_band(np.ones((4, 4), dtype=bool), 0.5)


@pytest.mark.parametrize("width", [1, 2, 3.5, 7, 25])
def test_band_matches_brute_force(rng, width):
    for _ in range(8):
        h, w = rng.integers(4, 40, size=2)
        mask = rng.random((h, w)) < rng.uniform(0.01, 0.2)
        if not mask.any():
            mask[h // 2, w // 2] = True
        assert np.array_equal(border_band(mask, width).bits, band_brute_force(mask, width))


def test_band_disjoint_and_monotone(rng):
    for _ in range(20):
        mask = rng.random((30, 30)) < 0.05
        mask[15, 15] = True
        prev = np.zeros_like(mask)
        for w in (1, 2, 5, 9, 15):
            band = border_band(InstanceMask(mask), w).bits
            assert not (band & mask).any()
            assert band.any()
            assert not (prev & ~band).any()
            prev = band


def test_band_chebyshev_is_square():
    mask = np.zeros((9, 9), dtype=bool)
    mask[4, 4] = True
    band = border_band(mask, 2, "chebyshev").bits
    expect = np.zeros_like(mask)
    expect[2:7, 2:7] = True
    expect[4, 4] = False
    assert np.array_equal(band, expect)
    with pytest.raises(ValueError):
        border_band(mask, 2, "manhattan")


def test_iou_examples():
    a = np.zeros((4, 4), dtype=bool)
    a[0:2, 0:2] = True
    b = np.zeros((4, 4), dtype=bool)
    b[0:2, 1:3] = True
    assert iou(a, a) == 1.0
    assert iou(a, ~a) == 0.0
    assert iou(a, b) == pytest.approx(2 / 6, abs=0)
    assert iou(np.zeros((2, 2), bool), np.zeros((2, 2), bool)) == 0.0
    with pytest.raises(DimensionMismatch):
        iou(a, np.zeros((3, 4), bool))


def test_iou_symmetric_and_identity(rng):
    for _ in range(200):
        a = rng.random((6, 6)) < 0.5
        b = rng.random((6, 6)) < 0.5
        assert iou(a, b) == iou(b, a)
        assert (iou(a, b) == 1.0) == (np.array_equal(a, b) and a.any())


def test_pointcloud_counts_and_values(K_small, rng):
    assert len(to_pointcloud(DepthMap(np.zeros(K_small.shape)), K_small)) == 0
    const = to_pointcloud(DepthMap(np.full(K_small.shape, 2.0)), K_small)
    assert len(const) == K_small.width * K_small.height and np.all(const.xyz[:, 2] == 2.0)
    data = rng.uniform(0.5, 4, K_small.shape) * (rng.random(K_small.shape) < 0.6)
    cloud = to_pointcloud(DepthMap(data), K_small)
    assert len(cloud) == sum(1 for x in data.ravel() if x > 0)
    with pytest.raises(DimensionMismatch):
        to_pointcloud(DepthMap(np.ones((3, 3))), K_small)


def test_ply_empty_header(tmp_path):
    path = tmp_path / "e.ply"
    write_ply(path, PointCloud(np.zeros((0, 3))))
    text = path.read_text()
    assert text.startswith("ply\nformat ascii 1.0\n")
    assert "element vertex 0\n" in text and text.endswith("end_header\n")


def test_ply_parses_with_third_party_reader(tmp_path):
    plyfile = pytest.importorskip("plyfile")
    K = CameraIntrinsics(2.0, 2.0, 0.5, 0.5, 2, 2)
    depth = DepthMap(np.array([[1.5, 0.0], [0.0, 0.0]]))
    color = np.zeros((2, 2, 3), dtype=np.uint8)
    color[0, 0] = (255, 7, 128)
    path = tmp_path / "c.ply"
    write_ply(path, to_pointcloud(depth, K, color))
    vertex = plyfile.PlyData.read(str(path))["vertex"]
    assert len(vertex) == 1
    assert (vertex["red"][0], vertex["green"][0], vertex["blue"][0]) == (255, 7, 128)
    assert vertex["x"][0] == pytest.approx(-0.375) and vertex["z"][0] == pytest.approx(1.5)


def test_ply_colored_bytes_exact(tmp_path, K_small, rng):
    plyfile = pytest.importorskip("plyfile")
    color = rng.integers(0, 256, size=(*K_small.shape, 3), dtype=np.uint8)
    depth = DepthMap(rng.uniform(0.5, 3, K_small.shape))
    cloud = to_pointcloud(depth, K_small, color)
    path = tmp_path / "c.ply"
    write_ply(path, cloud)
    v = plyfile.PlyData.read(str(path))["vertex"]
    got = np.stack([v["red"], v["green"], v["blue"]], axis=1)
    assert np.array_equal(got, color.reshape(-1, 3))
    assert np.array_equal(np.stack([v["x"], v["y"], v["z"]], axis=1), cloud.xyz.astype(np.float32))
