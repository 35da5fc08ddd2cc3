"""Farthest point sampling and attention-guided priority sampling.

Both samplers pick ``k`` distinct points one at a time.  Plain FPS always
takes the point farthest (by current minimum distance) from everything
selected so far.  The attention-guided variant (``ag_sample``) instead
maximizes a fused priority

    priority = attn_norm + lambda_dist * dist_norm

where ``attn_norm`` is the min-max normalized attention field and
``dist_norm`` is the min-max normalized minimum distance to the selected
set, recomputed every iteration.  With constant attention the priority
reduces to dispersion only and the sampler walks the exact FPS sequence;
with ``lambda_dist = 0`` it degenerates to picking attention in descending
order.

Every argmax breaks ties toward the lowest index, which makes the output a
pure function of the input.  ``ag_sample_oracle`` recomputes all distances
from scratch at every iteration and exists purely as an auditable reference
for the incremental fast path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    AttentionField,
    NotEnoughPointsError,
    PointCloud,
    SampleSet,
    SamplerConfig,
    ValidationError,
)


def point_distances(points: np.ndarray, index: int) -> np.ndarray:
    """Euclidean distances from every point to ``points[index]``.

    The fast path, the oracle and the verification tests all funnel through
    this single helper so their distance values are bit-identical.
    """
    diff = points - points[index]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def normalize_attention(field: AttentionField, epsilon: float) -> np.ndarray:
    """Min-max normalize attention weights into [0, 1).

    A constant field maps to all zeros; positive affine rescalings of the
    input leave the output (nearly) unchanged, so samplers driven by the
    normalized weights do not care about the absolute attention scale.
    """
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    w = field.weights
    lo = w.min()
    hi = w.max()
    return (w - lo) / (hi - lo + epsilon)


def _minmax_normalize(values: np.ndarray, epsilon: float) -> np.ndarray:
    lo = values.min()
    hi = values.max()
    return (values - lo) / (hi - lo + epsilon)


@dataclass
class WorkingDistances:
    """Running minimum distance from every point to the selected set.

    ``d_min`` is zero exactly at selected indices.  ``register`` folds one
    newly selected point into the minimum in O(N); ``normalized`` applies
    the same min-max mapping used for attention, over all points including
    the selected ones (whose zeros pin the minimum once anything has been
    selected).
    """

    points: np.ndarray
    d_min: np.ndarray

    @classmethod
    def start(cls, points: np.ndarray, first_index: int) -> "WorkingDistances":
        return cls(points=points, d_min=point_distances(points, first_index))

    def register(self, index: int) -> None:
        np.minimum(self.d_min, point_distances(self.points, index), out=self.d_min)

    def normalized(self, epsilon: float) -> np.ndarray:
        return _minmax_normalize(self.d_min, epsilon)


def _argmax_among(scores: np.ndarray, candidates: np.ndarray) -> int:
    # np.argmax returns the first maximizer, so the lowest candidate index wins ties.
    return int(candidates[np.argmax(scores[candidates])])


def _check_k(k: int, n: int) -> None:
    if k > n:
        raise NotEnoughPointsError(f"cannot sample {k} from {n} points")


def fps(cloud: PointCloud, k: int, start_index: int = 0) -> SampleSet:
    """Farthest point sampling: repeatedly take the point with the largest
    current minimum distance to the selected set, lowest index on ties."""
    pts = cloud.points
    n = len(cloud)
    _check_k(k, n)
    if not 0 <= start_index < n:
        raise ValidationError(f"start_index {start_index} out of range for {n} points")

    selected = [start_index]
    unselected = np.ones(n, dtype=bool)
    unselected[start_index] = False
    work = WorkingDistances.start(pts, start_index)
    for _ in range(1, k):
        nxt = _argmax_among(work.d_min, np.flatnonzero(unselected))
        selected.append(nxt)
        unselected[nxt] = False
        work.register(nxt)
    return SampleSet(tuple(selected))


def _first_pick(attn_norm: np.ndarray, config: SamplerConfig, n: int) -> int:
    if config.start_index is None:
        return int(np.argmax(attn_norm))
    if config.start_index >= n:
        raise ValidationError(f"start_index {config.start_index} out of range for {n} points")
    return config.start_index


def ag_sample(
    cloud: PointCloud, attention: AttentionField, config: SamplerConfig
) -> SampleSet:
    """Attention-guided sampling with an incrementally maintained distance field.

    The first pick is the highest normalized attention (unless the config
    pins a start index); every later pick maximizes
    ``attn_norm + lambda_dist * dist_norm`` over the not-yet-selected points,
    where the distance normalization is rederived from the current minimum
    distances at each iteration.  Selected points are excluded through the
    candidate index set rather than by poisoning their priority.
    """
    attention.paired_with(cloud)
    pts = cloud.points
    n = len(cloud)
    _check_k(config.k, n)

    attn_norm = normalize_attention(attention, config.epsilon)
    first = _first_pick(attn_norm, config, n)
    selected = [first]
    unselected = np.ones(n, dtype=bool)
    unselected[first] = False
    work = WorkingDistances.start(pts, first)
    for _ in range(1, config.k):
        priority = attn_norm + config.lambda_dist * work.normalized(config.epsilon)
        nxt = _argmax_among(priority, np.flatnonzero(unselected))
        selected.append(nxt)
        unselected[nxt] = False
        work.register(nxt)
    return SampleSet(tuple(selected))


def ag_sample_oracle(
    cloud: PointCloud, attention: AttentionField, config: SamplerConfig
) -> SampleSet:
    """Reference implementation of ``ag_sample``.

    Recomputes the full distance matrix between all points and the selected
    set from scratch at every iteration (O(N^2 K) overall).  Kept free of
    incremental state on purpose: the fast path must reproduce its index
    sequence exactly.
    """
    attention.paired_with(cloud)
    pts = cloud.points
    n = len(cloud)
    _check_k(config.k, n)

    attn_norm = normalize_attention(attention, config.epsilon)
    first = _first_pick(attn_norm, config, n)
    selected = [first]
    for _ in range(1, config.k):
        all_dists = np.stack([point_distances(pts, j) for j in selected])
        d_min = all_dists.min(axis=0)
        priority = attn_norm + config.lambda_dist * _minmax_normalize(d_min, config.epsilon)
        taken = set(selected)
        candidates = np.array([i for i in range(n) if i not in taken])
        selected.append(_argmax_among(priority, candidates))
    return SampleSet(tuple(selected))
