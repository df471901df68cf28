"""Command-line entry point: ``mirrorplane <command> [options]``.

Exit codes: 0 success, 1 fatal input error (nothing written), 2 partial
success with per-instance error records.

Option precedence: built-in defaults < ``--config`` JSON file < flags. The
default worker count comes from the MIRRORPLANE_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import defaults
from .anchors import build_codebook
from .errors import EmptyValidSet, MirrorPlaneError, NoGroundTruth
from .geometry import CameraIntrinsics, Plane3D
from .imaging import (
    DepthMap,
    IndexEntry,
    read_depth,
    read_index,
    read_mask,
    to_pointcloud,
    write_depth,
    write_index,
    write_mask,
    write_ply,
)
from .metrics import DepthAccumulator, Detection, GroundTruth, eval_detections, mean_of_reports
from .plane_fit import OFFSET_RULES, RansacConfig
from .refine import AUTO, fit_instance_plane, refine_frame
from .synth import CORRUPTIONS, SceneOptions, corrupt, default_intrinsics, random_scene, render_gt

log = logging.getLogger("mirrorplane")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


class FatalInput(Exception):
    """Input problem that aborts the command before any output is written."""


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(defaults.THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class RunConfig:
    depth: Optional[str] = None
    index: Optional[str] = None
    intrinsics: Optional[str] = None
    plane: Optional[str] = None
    out: Optional[str] = None
    band_width: float = defaults.BAND_WIDTH
    band_metric: str = defaults.BAND_METRIC
    offset_rule: str = defaults.OFFSET_RULE
    ransac_iterations: int = defaults.RANSAC_ITERATIONS
    ransac_threshold: float = defaults.RANSAC_THRESHOLD
    ransac_min_inliers: Optional[int] = None
    seed: int = 0
    depth_scale: float = defaults.DEPTH_SCALE
    min_gt: float = defaults.MIN_GT_DEPTH
    k: int = defaults.ANCHOR_COUNT
    threads: int = field(default_factory=_default_threads)

    @property
    def ransac(self) -> RansacConfig:
        return RansacConfig(self.ransac_iterations, self.ransac_threshold, self.ransac_min_inliers, self.seed)


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)}
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
        unknown = set(data) - names
        if unknown:
            raise FatalInput(f"unknown config keys: {sorted(unknown)}")
        for key, value in data.items():
            setattr(cfg, key, value)
    for key in names:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def _require(cfg: RunConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise FatalInput("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _dump(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _load_frame(cfg: RunConfig):
    """Read intrinsics, depth and every indexed mask; any failure is fatal."""
    _require(cfg, "depth", "index", "intrinsics", "out")
    try:
        K = CameraIntrinsics.load(cfg.intrinsics)
        depth = read_depth(cfg.depth, cfg.depth_scale)
        entries = read_index(cfg.index)
        masks = [read_mask(e.mask_path, e.instance_id) for e in entries]
        planes = [Plane3D.load(e.plane_path) if e.plane_path else None for e in entries]
    except (OSError, ValueError, KeyError, MirrorPlaneError) as exc:
        raise FatalInput(str(exc)) from exc
    if depth.shape != K.shape:
        raise FatalInput(f"depth {depth.shape} does not match intrinsics {K.shape}")
    for e, m in zip(entries, masks):
        if m.shape != depth.shape:
            raise FatalInput(f"mask {e.mask_path} {m.shape} does not match depth {depth.shape}")
    return K, depth, entries, masks, planes


def cmd_fit_plane(cfg: RunConfig) -> int:
    K, depth, entries, masks, _ = _load_frame(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    union = np.zeros(depth.shape, dtype=bool)
    for m in masks:
        union |= m.bits
    rows, failed = [], 0
    for entry, mask in sorted(zip(entries, masks), key=lambda em: em[0].instance_id):
        row = {"instance_id": entry.instance_id, "mask_path": os.path.relpath(entry.mask_path, out), "plane_path": None}
        try:
            plane, n_band, n_inl = fit_instance_plane(
                depth,
                mask,
                K,
                band_width=cfg.band_width,
                fit=cfg.ransac,
                rule=cfg.offset_rule,
                band_metric=cfg.band_metric,
                exclude=union & ~mask.bits,
                workers=cfg.threads,
            )
            name = f"plane_{entry.instance_id}.json"
            plane.save(out / name)
            row.update(plane_path=name, band_points=n_band, inliers=n_inl, error=None)
        except MirrorPlaneError as exc:
            failed += 1
            row["error"] = {"code": exc.code, "message": str(exc)}
            log.warning("instance %s: %s", entry.instance_id, exc)
        rows.append(row)
    _dump(out / "index.json", rows)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_refine(cfg: RunConfig) -> int:
    K, depth, entries, masks, planes = _load_frame(cfg)
    instances = [(m, p if p is not None else AUTO) for m, p in zip(masks, planes)]
    result = refine_frame(
        depth,
        instances,
        K,
        band_width=cfg.band_width,
        fit=cfg.ransac,
        rule=cfg.offset_rule,
        band_metric=cfg.band_metric,
        workers=cfg.threads,
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        write_depth(out / "refined.png", result.depth)
    except ValueError as exc:
        raise FatalInput(str(exc)) from exc
    stats = {
        "replaced_px": result.replaced_px,
        "skipped_px": result.skipped_px,
        "instances": [o.to_dict() for o in result.instances],
    }
    _dump(out / "stats.json", stats)
    return EXIT_PARTIAL if result.failed else EXIT_OK


def _eval_frame(name: str, pred_dir: Path, gt_dir: Path, mask_dir: Optional[Path], cfg: RunConfig, ssim_window: str):
    pred = read_depth(pred_dir / name, cfg.depth_scale)
    gt = read_depth(gt_dir / name, cfg.depth_scale)
    mask = read_mask(mask_dir / name).bits if mask_dir else None
    acc = DepthAccumulator(cfg.min_gt, ssim_window)
    acc.add(pred, gt, mask)
    return acc


def cmd_eval_depth(cfg: RunConfig, args: argparse.Namespace) -> int:
    if not args.pred_dir or not args.gt_dir:
        raise FatalInput("--pred-dir and --gt-dir are required")
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    mask_dir = Path(args.mask_dir) if args.mask_dir else None
    names = sorted(p.name for p in gt_dir.glob("*.png")) if gt_dir.is_dir() else []
    if not names:
        raise FatalInput(f"no ground-truth frames found in {gt_dir}")
    for name in names:
        for d in (pred_dir, mask_dir):
            if d is not None and not (d / name).is_file():
                raise FatalInput(f"missing {d / name}")

    def run(name):
        try:
            return name, _eval_frame(name, pred_dir, gt_dir, mask_dir, cfg, args.ssim_window), None
        except EmptyValidSet as exc:
            return name, None, exc

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        results = list(pool.map(run, names))

    pooled = DepthAccumulator(cfg.min_gt, args.ssim_window)
    per_frame, errors = [], []
    for name, acc, err in results:
        if err is not None:
            errors.append({"frame": name, "code": err.code, "message": str(err)})
            continue
        per_frame.append((name, acc.report()))
        pooled.merge(acc)
    if not per_frame:
        raise FatalInput("no frame had any valid ground-truth pixel")
    report = mean_of_reports(r for _, r in per_frame) if args.per_frame else pooled.report()
    report.frame_errors = errors
    payload = report.to_dict()
    payload["mode"] = "per-frame" if args.per_frame else "pooled"

    if cfg.out:
        _dump(cfg.out, payload)
    else:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    if args.csv:
        _write_csv(args.csv, per_frame)
    return EXIT_OK


def _write_csv(path, per_frame) -> None:
    metrics = ["rmse", "s_rmse", "abs_rel", "ssim"] + [f"delta_{t!r}" for t in defaults.DELTA_THRESHOLDS]
    header = ["frame"] + [f"{r}_{m}" for r in ("mirror", "other", "all") for m in metrics + ["evaluated_px"]]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for name, rep in per_frame:
            row = [name]
            for region in ("mirror", "other", "all"):
                m = rep.regions[region]
                if m is None:
                    row += [""] * (len(metrics) + 1)
                    continue
                row += [m.rmse, "" if m.s_rmse is None else m.s_rmse, m.abs_rel, m.ssim]
                row += [m.delta[t] for t in defaults.DELTA_THRESHOLDS]
                row.append(m.evaluated_px)
            writer.writerow(row)


def _load_detection_file(path):
    path = Path(path)
    rows = json.loads(path.read_text())
    base = path.parent
    return rows, base


def cmd_eval_det(cfg: RunConfig, args: argparse.Namespace) -> int:
    if not args.detections or not args.ground_truth:
        raise FatalInput("--detections and --ground-truth are required")
    try:
        pred_rows, pbase = _load_detection_file(args.detections)
        gt_rows, gbase = _load_detection_file(args.ground_truth)
        preds = [
            Detection(read_mask(pbase / r["mask_path"]), float(r["confidence"]), r.get("normal"), r.get("frame", 0))
            for r in pred_rows
        ]
        gts = [GroundTruth(read_mask(gbase / r["mask_path"]), r.get("normal"), r.get("frame", 0)) for r in gt_rows]
    except (OSError, ValueError, KeyError, MirrorPlaneError) as exc:
        raise FatalInput(str(exc)) from exc
    if not args.seg_only:
        if any(p.normal is None for p in preds):
            raise FatalInput("30-degree AP needs a normal on every detection (use --seg-only to skip it)")
        if any(g.normal is None for g in gts):
            raise FatalInput("30-degree AP needs a normal on every ground-truth instance")
    try:
        payload = {"seg_ap": eval_detections(preds, gts, "seg")}
        if not args.seg_only:
            payload["ap30"] = eval_detections(preds, gts, "seg+angle")
    except NoGroundTruth:
        payload = {"seg_ap": None}
        if not args.seg_only:
            payload["ap30"] = None
    if cfg.out:
        _dump(cfg.out, payload)
    else:
        print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_anchors(cfg: RunConfig, args: argparse.Namespace) -> int:
    if not args.normals:
        raise FatalInput("--normals is required")
    _require(cfg, "out")
    try:
        normals = np.asarray(json.loads(Path(args.normals).read_text()), dtype=np.float64)
        cb = build_codebook(normals, cfg.k, cfg.seed, spherical=args.spherical)
    except (OSError, ValueError, MirrorPlaneError) as exc:
        raise FatalInput(str(exc)) from exc
    cb.save(cfg.out)
    return EXIT_OK


def cmd_synth(cfg: RunConfig, args: argparse.Namespace) -> int:
    _require(cfg, "out")
    K = CameraIntrinsics.load(cfg.intrinsics) if cfg.intrinsics else default_intrinsics(args.width, args.height)
    opts = SceneOptions(
        corruption=args.corruption,
        noise_sigma=args.noise_sigma,
        outlier_fraction=args.outlier_fraction,
        band_outlier_fraction=args.band_outlier_fraction,
        border_width=cfg.band_width,
    )
    out = Path(cfg.out)
    for sub in ("gt", "noisy", "masks", "scenes"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    K.save(out / "intrinsics.json")
    for i in range(args.count):
        name = f"{i:04d}"
        try:
            spec = random_scene(cfg.seed * 100003 + i, K, opts)
        except RuntimeError as exc:
            raise FatalInput(f"{exc} (image too small for the band width?)") from exc
        gt = render_gt(spec)
        noisy = corrupt(gt.depth, gt.mask, gt.plane, spec)
        scene_dir = out / "scenes" / name
        scene_dir.mkdir(exist_ok=True)
        write_depth(out / "gt" / f"{name}.png", DepthMap(gt.depth.data, cfg.depth_scale))
        write_depth(out / "noisy" / f"{name}.png", DepthMap(noisy.data, cfg.depth_scale))
        write_mask(out / "masks" / f"{name}.png", gt.mask)
        write_mask(scene_dir / "mask_0.png", gt.mask)
        gt.plane.save(scene_dir / "gt_plane.json")
        spec.save(scene_dir / "scene.json")
        write_index(scene_dir / "index.json", [IndexEntry(0, "mask_0.png", None)])
    return EXIT_OK


def cmd_pointcloud(cfg: RunConfig, args: argparse.Namespace) -> int:
    _require(cfg, "depth", "intrinsics", "out")
    try:
        K = CameraIntrinsics.load(cfg.intrinsics)
        depth = read_depth(cfg.depth, cfg.depth_scale)
        color = _read_rgb(args.color) if args.color else None
        cloud = to_pointcloud(depth, K, color)
    except (OSError, ValueError, MirrorPlaneError) as exc:
        raise FatalInput(str(exc)) from exc
    write_ply(cfg.out, cloud)
    return EXIT_OK


def _read_rgb(path) -> np.ndarray:
    import png

    width, height, rows, info = png.Reader(filename=str(path)).asRGB8()
    return np.vstack([np.asarray(r, dtype=np.uint8) for r in rows]).reshape(height, width, 3)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig fields (flags override it)")
    p.add_argument("--out", help="output directory or file")
    p.add_argument("--depth-scale", type=float, help="raw PNG units per meter (default 1000)")
    p.add_argument("--threads", type=int, help=f"worker threads (default ${defaults.THREADS_ENV} or 1)")
    p.add_argument("--seed", type=int)


def _add_frame(p: argparse.ArgumentParser) -> None:
    p.add_argument("--depth", help="16-bit depth PNG")
    p.add_argument("--index", help="instance index JSON")
    p.add_argument("--intrinsics", help="intrinsics JSON")
    p.add_argument("--band-width", type=float, help="border band radius in pixels (default 25)")
    p.add_argument("--band-metric", choices=("euclidean", "chebyshev"))
    p.add_argument("--offset-rule", choices=OFFSET_RULES)
    p.add_argument("--ransac-iterations", type=int)
    p.add_argument("--ransac-threshold", type=float, help="inlier distance in meters")
    p.add_argument("--ransac-min-inliers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mirrorplane", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-plane", help="estimate a mirror plane per indexed instance")
    _add_common(p)
    _add_frame(p)

    p = sub.add_parser("refine", help="rewrite mirror depth from planes (given or fitted)")
    _add_common(p)
    _add_frame(p)

    p = sub.add_parser("eval-depth", help="depth metrics over a set of frames")
    _add_common(p)
    p.add_argument("--pred-dir")
    p.add_argument("--gt-dir")
    p.add_argument("--mask-dir", help="mirror masks named like the depth frames")
    p.add_argument("--min-gt", type=float, help="validity filter on gt depth (default 1e-5)")
    p.add_argument("--per-frame", action="store_true", help="average per-frame metrics instead of pooling pixels")
    p.add_argument("--ssim-window", choices=("gaussian", "global"), default="gaussian")
    p.add_argument("--csv", help="also write one CSV row per frame")

    p = sub.add_parser("eval-det", help="Seg-AP and 30-degree AP")
    _add_common(p)
    p.add_argument("--detections")
    p.add_argument("--ground-truth")
    p.add_argument("--seg-only", action="store_true")

    p = sub.add_parser("anchors", help="k-means anchor-normal codebook")
    _add_common(p)
    p.add_argument("--normals", help="JSON array of unit 3-vectors")
    p.add_argument("--k", type=int)
    p.add_argument("--spherical", action="store_true")

    p = sub.add_parser("synth", help="generate synthetic mirror scenes")
    _add_common(p)
    p.add_argument("--intrinsics")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=192)
    p.add_argument("--band-width", type=float)
    p.add_argument("--corruption", choices=CORRUPTIONS, default="behind_plane")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--outlier-fraction", type=float, default=0.0)
    p.add_argument("--band-outlier-fraction", type=float, default=0.0)

    p = sub.add_parser("pointcloud", help="export a depth map as an ASCII PLY point cloud")
    _add_common(p)
    p.add_argument("--depth")
    p.add_argument("--intrinsics")
    p.add_argument("--color", help="optional RGB PNG")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        if args.command == "fit-plane":
            return cmd_fit_plane(cfg)
        if args.command == "refine":
            return cmd_refine(cfg)
        handler = {
            "eval-depth": cmd_eval_depth,
            "eval-det": cmd_eval_det,
            "anchors": cmd_anchors,
            "synth": cmd_synth,
            "pointcloud": cmd_pointcloud,
        }[args.command]
        return handler(cfg, args)
    except (FatalInput, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
