"""Axis-aligned 3D IoU, greedy matching, average precision and mAP.

The protocol matches the common indoor-detection convention: predictions
are ranked by confidence, greedily matched to the unmatched ground-truth
box of the same class with the highest IoU at or above the threshold, and
AP is the area under the monotone (max-envelope) precision curve over all
recall points.  Per-class results are averaged over the classes that
actually appear in the ground truth.

Only axis-aligned boxes are supported; boxes with nonzero yaw are rejected
rather than silently evaluated wrong.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Box3D, DetectionSet, RotatedBoxUnsupportedError, ValidationError

SCANNET18_CLASSES = (
    "cabinet", "bed", "chair", "sofa", "table", "door", "window", "bookshelf",
    "picture", "counter", "desk", "curtain", "refrigerator", "showercurtain",
    "toilet", "sink", "bathtub", "otherfurniture",
)


@dataclass(frozen=True)
class EvalConfig:
    """Match threshold and the class-id -> name mapping used for reports."""

    iou_threshold: float = 0.25
    classes: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValidationError(
                f"iou_threshold must lie in (0, 1), got {self.iou_threshold}"
            )
        object.__setattr__(self, "classes", tuple(self.classes))

    def class_name(self, label: int) -> str:
        if 0 <= label < len(self.classes):
            return self.classes[label]
        return f"class{label}"


def iou_aabb(a: Box3D, b: Box3D) -> float:
    """Intersection-over-union of two axis-aligned boxes."""
    if a.yaw != 0.0 or b.yaw != 0.0:
        raise RotatedBoxUnsupportedError(
            f"IoU needs axis-aligned boxes, got yaws {a.yaw} and {b.yaw}"
        )
    a_lo, a_hi = a.bounds()
    b_lo, b_hi = b.bounds()
    overlap = np.minimum(a_hi, b_hi) - np.maximum(a_lo, b_lo)
    if np.any(overlap <= 0):
        return 0.0
    inter = float(np.prod(overlap))
    vol_a = float(np.prod(a_hi - a_lo))
    vol_b = float(np.prod(b_hi - b_lo))
    return inter / (vol_a + vol_b - inter)


def _match_flags(
    ranked: Sequence[tuple[int, Box3D]],
    gts_by_scene: dict[int, list[Box3D]],
    threshold: float,
) -> list[bool]:
    """Greedy TP/FP flags for predictions already ranked by confidence.

    ``ranked`` holds (scene id, box) pairs; each prediction may only match
    an unmatched ground-truth box from its own scene (highest IoU wins,
    lowest GT index on ties).
    """
    unmatched = {scene: [True] * len(boxes) for scene, boxes in gts_by_scene.items()}
    flags = []
    for scene, box in ranked:
        gt_boxes = gts_by_scene.get(scene, [])
        best_iou = 0.0
        best_j = -1
        for j, gt_box in enumerate(gt_boxes):
            if not unmatched[scene][j]:
                continue
            iou = iou_aabb(box, gt_box)
            if iou > best_iou:
                best_iou = iou
                best_j = j
        if best_j >= 0 and best_iou >= threshold:
            unmatched[scene][best_j] = False
            flags.append(True)
        else:
            flags.append(False)
    return flags


def _envelope_ap(tp_flags: Sequence[bool], num_gt: int) -> float:
    """Area under the monotone precision envelope over all recall points."""
    if num_gt == 0:
        return 0.0
    tp = np.cumsum(np.asarray(tp_flags, dtype=np.float64))
    ranks = np.arange(1, len(tp) + 1, dtype=np.float64)
    precision = tp / ranks
    recall = tp / num_gt

    # Sweep the envelope from the right, then integrate over recall steps.
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_recall = 0.0
    for r, p in zip(recall, envelope):
        if r > prev_recall:
            ap += (r - prev_recall) * p
            prev_recall = r
    return float(ap)


def average_precision(preds: DetectionSet, gts: DetectionSet, cfg: EvalConfig) -> float:
    """AP for a single class in a single scene.

    Both detection sets must already be restricted to one class.  With no
    ground truth the AP is 0.0 when predictions exist (they are all false
    positives) — callers skip such classes at the mAP level.
    """
    return _pooled_average_precision([preds], [gts], cfg)


def _pooled_average_precision(
    per_scene_preds: Sequence[DetectionSet],
    per_scene_gts: Sequence[DetectionSet],
    cfg: EvalConfig,
) -> float:
    num_gt = sum(len(g) for g in per_scene_gts)
    entries = [
        (scene, i, preds.scores[i], preds.boxes[i])
        for scene, preds in enumerate(per_scene_preds)
        for i in range(len(preds))
    ]
    if not entries:
        return 0.0
    # Descending score; ties resolved by scene order then prediction index.
    entries.sort(key=lambda e: (-e[2], e[0], e[1]))
    gts_by_scene = {scene: list(g.boxes) for scene, g in enumerate(per_scene_gts)}
    flags = _match_flags([(e[0], e[3]) for e in entries], gts_by_scene, cfg.iou_threshold)
    return _envelope_ap(flags, num_gt)


def mean_ap(
    per_scene_preds: Sequence[DetectionSet],
    per_scene_gts: Sequence[DetectionSet],
    cfg: EvalConfig,
) -> tuple[dict[int, float], float]:
    """Per-class AP over a scene collection, plus the mean.

    Detections are pooled across scenes per class (matching stays within
    each scene); the mean runs over the classes present in the ground
    truth.  Returns ({label: ap}, mAP); the mAP of an empty ground truth
    is 0.0.
    """
    if len(per_scene_preds) != len(per_scene_gts):
        raise ValidationError(
            f"{len(per_scene_preds)} prediction sets vs {len(per_scene_gts)} ground truths"
        )
    gt_labels = sorted({l for gts in per_scene_gts for l in gts.labels})
    per_class = {}
    for label in gt_labels:
        per_class[label] = _pooled_average_precision(
            [p.for_label(label) for p in per_scene_preds],
            [g.for_label(label) for g in per_scene_gts],
            cfg,
        )
    mean = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return per_class, mean
