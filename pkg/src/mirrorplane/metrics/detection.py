"""Mask AP averaged over IoU thresholds, optionally gated by normal angle.

Matching follows the COCO protocol: predictions are ranked by confidence
(stable for ties), each one greedily takes the unmatched ground truth of its
frame with the highest IoU at or above the threshold, and AP is the 101-point
interpolated area under the precision envelope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .. import defaults
from ..errors import NoGroundTruth
from ..geometry import angle_between, normalize
from ..imaging import iou

IOU_THRESHOLDS = defaults.IOU_THRESHOLDS
ANGLE_THRESHOLD = defaults.ANGLE_THRESHOLD_DEG
RECALL_POINTS = np.arange(101) / 100


@dataclass
class Detection:
    mask: object
    confidence: float
    normal: Optional[Sequence[float]] = None
    frame: object = 0

    def __post_init__(self):
        if not 0.0 <= float(self.confidence) <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass
class GroundTruth:
    mask: object
    normal: Optional[Sequence[float]] = None
    frame: object = 0


def _as_gt(item) -> GroundTruth:
    if isinstance(item, GroundTruth):
        return item
    mask, normal = item
    return GroundTruth(mask, normal)


def interpolated_ap(tp: Sequence[bool], n_gt: int) -> float:
    """101-point interpolated AP for a ranked list of true/false positives."""
    tp = np.asarray(tp, dtype=bool)
    if len(tp) == 0:
        return 0.0
    tps = np.cumsum(tp)
    fps = np.cumsum(~tp)
    recall = tps / n_gt
    precision = tps / (tps + fps)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.where(idx < len(recall), envelope[np.minimum(idx, len(recall) - 1)], 0.0)
    return float(sampled.sum() / len(RECALL_POINTS))


def match_counts(preds, gts, mode: str = "seg", angle_threshold: float = ANGLE_THRESHOLD, thresholds=IOU_THRESHOLDS):
    """True-positive flags (in ranked order) for each IoU threshold."""
    gts = [_as_gt(g) for g in gts]
    order = sorted(range(len(preds)), key=lambda i: -float(preds[i].confidence))
    by_frame: dict = {}
    for gi, g in enumerate(gts):
        by_frame.setdefault(g.frame, []).append(gi)

    ious = {}
    angle_ok = {}
    for pi in order:
        p = preds[pi]
        for gi in by_frame.get(p.frame, []):
            ious[pi, gi] = iou(p.mask, gts[gi].mask)
            if mode == "seg+angle":
                angle_ok[pi, gi] = (
                    angle_between(normalize(p.normal), normalize(gts[gi].normal)) < angle_threshold
                )

    flags = {}
    for t in thresholds:
        matched = set()
        tp = []
        for pi in order:
            best, best_iou = None, -1.0
            for gi in by_frame.get(preds[pi].frame, []):
                if gi in matched:
                    continue
                v = ious[pi, gi]
                if v < t or v <= best_iou:
                    continue
                if mode == "seg+angle" and not angle_ok[pi, gi]:
                    continue
                best, best_iou = gi, v
            if best is not None:
                matched.add(best)
            tp.append(best is not None)
        flags[t] = tp
    return flags


def eval_detections(
    preds: Sequence[Detection],
    gts,
    mode: str = "seg",
    *,
    angle_threshold: float = ANGLE_THRESHOLD,
    thresholds=IOU_THRESHOLDS,
) -> float:
    """Seg-AP (``mode="seg"``) or angle-gated AP (``mode="seg+angle"``).

    ``gts`` holds :class:`GroundTruth` items or ``(mask, normal)`` pairs.

    Raises:
        NoGroundTruth: ``gts`` is empty; the score is undefined rather than 0.
        ValueError: angle mode with a missing prediction or GT normal.
    """
    if mode not in ("seg", "seg+angle"):
        raise ValueError(f"unknown mode {mode!r}")
    gts = [_as_gt(g) for g in gts]
    if not gts:
        raise NoGroundTruth("no ground-truth instances to evaluate against")
    if mode == "seg+angle":
        if any(p.normal is None for p in preds):
            raise ValueError("angle-gated AP needs a normal on every prediction")
        if any(g.normal is None for g in gts):
            raise ValueError("angle-gated AP needs a normal on every ground truth")
    flags = match_counts(preds, gts, mode, angle_threshold, thresholds)
    aps = [interpolated_ap(flags[t], len(gts)) for t in thresholds]
    return sum(aps) / len(aps)
