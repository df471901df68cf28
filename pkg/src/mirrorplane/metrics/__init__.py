from .depth import (
    DELTA_THRESHOLDS,
    MIN_GT,
    DepthAccumulator,
    MetricReport,
    RegionMetrics,
    abs_rel,
    delta,
    eval_depth,
    mean_of_reports,
    optimal_scale,
    rmse,
    s_rmse,
)
from .detection import IOU_THRESHOLDS, Detection, GroundTruth, eval_detections, interpolated_ap
from .ssim import C1, C2, global_ssim, ssim, ssim_map

__all__ = [
    "C1",
    "C2",
    "DELTA_THRESHOLDS",
    "IOU_THRESHOLDS",
    "MIN_GT",
    "DepthAccumulator",
    "Detection",
    "GroundTruth",
    "MetricReport",
    "RegionMetrics",
    "abs_rel",
    "delta",
    "eval_depth",
    "eval_detections",
    "global_ssim",
    "interpolated_ap",
    "mean_of_reports",
    "optimal_scale",
    "rmse",
    "s_rmse",
    "ssim",
    "ssim_map",
]
