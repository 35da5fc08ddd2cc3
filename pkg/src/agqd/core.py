"""Shared domain types for point clouds, attention fields, boxes and scenes.

Everything downstream (sampling, aggregation, evaluation, generation, I/O)
works in terms of the value objects defined here.  All numeric payloads are
float64 numpy arrays, validated as finite at construction time and frozen
(read-only buffers) afterwards, so instances can be shared freely across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class ValidationError(ValueError):
    """Invalid domain value (bad shape, non-finite payload, broken invariant)."""


class EmptyCloudError(ValidationError):
    """Operation requires a non-empty point cloud."""


class NotEnoughPointsError(ValidationError):
    """Requested more samples than there are points."""


class ShapeError(ValidationError):
    """Array arguments have inconsistent dimensions."""


class RotatedBoxUnsupportedError(ValidationError):
    """Evaluation path only supports axis-aligned (yaw = 0) boxes."""


class PackingFailedError(RuntimeError):
    """Synthetic scene generation could not place all objects."""


def as_float_array(values, name: str, *, ndim: int | None = None) -> np.ndarray:
    """Copy ``values`` into a read-only float64 array, rejecting NaN/Inf."""
    arr = np.array(values, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PointCloud:
    """N points with 3D coordinates (scene units, meters by convention)."""

    points: np.ndarray

    def __post_init__(self):
        pts = as_float_array(self.points, "points", ndim=2)
        if pts.shape[1] != 3:
            raise ShapeError(f"points must have shape (N, 3), got {pts.shape}")
        if pts.shape[0] < 1:
            raise EmptyCloudError("a point cloud needs at least one point")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class AttentionField:
    """Per-point scalar attention weights, index-aligned with a cloud."""

    weights: np.ndarray

    def __post_init__(self):
        w = as_float_array(self.weights, "weights", ndim=1)
        if w.shape[0] < 1:
            raise ShapeError("weights must contain at least one value")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.shape[0]

    def paired_with(self, cloud: PointCloud) -> None:
        """Raise unless this field is index-aligned with ``cloud``."""
        if len(self) != len(cloud):
            raise ShapeError(
                f"attention length {len(self)} does not match cloud size {len(cloud)}"
            )


@dataclass(frozen=True)
class SamplerConfig:
    """Settings for priority sampling.

    ``lambda_dist`` trades attention guidance against spatial dispersion,
    ``epsilon`` stabilizes the min-max normalizations, and ``start_index``
    overrides the first pick (``None`` means start at the highest-attention
    point).
    """

    k: int = 256
    lambda_dist: float = 0.8
    epsilon: float = 1e-8
    start_index: Optional[int] = None

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.lambda_dist <= 1.0:
            raise ValidationError(f"lambda_dist must lie in [0, 1], got {self.lambda_dist}")
        if not self.epsilon > 0.0 or not np.isfinite(self.epsilon):
            raise ValidationError(f"epsilon must be a finite positive value, got {self.epsilon}")
        if self.start_index is not None and self.start_index < 0:
            raise ValidationError("start_index must be a nonnegative index")


@dataclass(frozen=True)
class SampleSet:
    """Ordered, distinct point indices in selection order."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValidationError("sample indices must be distinct")
        if any(i < 0 for i in idx):
            raise ValidationError("sample indices must be nonnegative")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def validate_against(self, cloud: PointCloud) -> None:
        if any(i >= len(cloud) for i in self.indices):
            raise ValidationError("sample index out of range for cloud")

    def as_array(self) -> np.ndarray:
        return np.array(self.indices, dtype=np.int64)


@dataclass(frozen=True)
class FeatureLevels:
    """L stacked token feature maps, each of shape (N_tok, C).

    ``level_ids`` are metadata tags naming the source layer of each level;
    they never influence computation.
    """

    levels: np.ndarray
    level_ids: tuple[int, ...] = ()

    def __post_init__(self):
        lv = as_float_array(self.levels, "levels", ndim=3)
        if lv.shape[0] < 1:
            raise ShapeError("need at least one feature level")
        ids = tuple(int(i) for i in self.level_ids) or tuple(range(lv.shape[0]))
        if len(ids) != lv.shape[0]:
            raise ShapeError(
                f"{len(ids)} level_ids for {lv.shape[0]} levels"
            )
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "level_ids", ids)

    @property
    def num_levels(self) -> int:
        return self.levels.shape[0]

    @property
    def num_tokens(self) -> int:
        return self.levels.shape[1]

    @property
    def dim(self) -> int:
        return self.levels.shape[2]


@dataclass(frozen=True)
class Box3D:
    """Axis-stored 7-DoF box: center, positive extents, yaw in [-pi, pi)."""

    center: np.ndarray
    size: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        c = as_float_array(self.center, "center", ndim=1)
        s = as_float_array(self.size, "size", ndim=1)
        if c.shape != (3,) or s.shape != (3,):
            raise ShapeError("center and size must be 3-vectors")
        if not np.all(s > 0):
            raise ValidationError(f"size components must be positive, got {s.tolist()}")
        yaw = float(self.yaw)
        if not np.isfinite(yaw):
            raise ValidationError("yaw must be finite")
        if not -np.pi <= yaw < np.pi:
            raise ValidationError(f"yaw must lie in [-pi, pi), got {yaw}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "size", s)
        object.__setattr__(self, "yaw", yaw)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(lower, upper) corners of the axis-aligned extent."""
        half = self.size / 2.0
        return self.center - half, self.center + half

    def contains(self, point: np.ndarray) -> bool:
        lo, hi = self.bounds()
        return bool(np.all(point >= lo) and np.all(point <= hi))


def wrap_yaw(angle: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return float((angle + np.pi) % (2.0 * np.pi) - np.pi)


@dataclass(frozen=True)
class DetectionSet:
    """Parallel arrays of boxes, integer class labels and confidences."""

    boxes: tuple[Box3D, ...]
    labels: tuple[int, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        boxes = tuple(self.boxes)
        labels = tuple(int(l) for l in self.labels)
        scores = tuple(float(s) for s in self.scores)
        if not len(boxes) == len(labels) == len(scores):
            raise ShapeError(
                f"parallel arrays differ in length: {len(boxes)} boxes, "
                f"{len(labels)} labels, {len(scores)} scores"
            )
        for s in scores:
            if not np.isfinite(s) or not 0.0 <= s <= 1.0:
                raise ValidationError(f"scores must lie in [0, 1], got {s}")
        for l in labels:
            if l < 0:
                raise ValidationError(f"labels must be nonnegative, got {l}")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return len(self.boxes)

    @staticmethod
    def empty() -> "DetectionSet":
        return DetectionSet((), (), ())

    def for_label(self, label: int) -> "DetectionSet":
        """Subset containing only detections of one class."""
        keep = [i for i, l in enumerate(self.labels) if l == label]
        return DetectionSet(
            tuple(self.boxes[i] for i in keep),
            tuple(self.labels[i] for i in keep),
            tuple(self.scores[i] for i in keep),
        )


@dataclass(frozen=True)
class Scene:
    """A point cloud with its attention field, ground truth and optional features."""

    cloud: PointCloud
    attention: AttentionField
    gt: DetectionSet
    features: Optional[FeatureLevels] = None

    def __post_init__(self):
        self.attention.paired_with(self.cloud)


def bounding_range(cloud: PointCloud) -> float:
    """Global max coordinate minus global min coordinate over all axes.

    This is the scalar value range used to scale noise; it is zero only for
    a single repeated point.
    """
    pts = cloud.points
    if pts.size == 0:
        raise EmptyCloudError("cannot compute the range of an empty cloud")
    return float(pts.max() - pts.min())
