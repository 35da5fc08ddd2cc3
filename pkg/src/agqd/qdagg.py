"""Query-driven feature aggregation and the toy decoder stack.

A single learnable see-query token rides along with the K object queries.
Before each decoder layer it is pushed through a small MLP and a softmax to
produce a weight per feature level; the levels are blended with those
weights into the cross-attention target.  The unified (K+1)-row query
matrix then goes through self-attention and cross-attention (residual
around each sublayer), and the updated row 0 becomes the see-query for the
next layer.  One parameter set is shared by all layers; only the see-query
activation evolves.

``grad_check_weights`` verifies the analytical Jacobian of the weight path
(softmax Jacobian ``diag(w) - w w^T`` chained through the MLP) against
central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import Box3D, DetectionSet, FeatureLevels, ShapeError, as_float_array, wrap_yaw
from .nncore import AttentionParams, MlpParams, mha, mlp, softmax_rows, softmax_vec

DEFAULT_LEVEL_TAGS = (4, 11, 17, 23)


@dataclass(frozen=True)
class SeeQueryState:
    """The see-query activation plus the MLP that turns it into level logits."""

    q_see: np.ndarray
    mlp: MlpParams

    def __post_init__(self):
        q = as_float_array(self.q_see, "q_see", ndim=1)
        if q.shape[0] != self.mlp.in_dim:
            raise ShapeError(
                f"q_see has dim {q.shape[0]} but the MLP expects {self.mlp.in_dim}"
            )
        object.__setattr__(self, "q_see", q)

    @property
    def num_levels(self) -> int:
        return self.mlp.out_dim

    def with_query(self, q_see: np.ndarray) -> "SeeQueryState":
        return replace(self, q_see=q_see)

    @classmethod
    def random(
        cls, rng: np.random.Generator, dim: int, num_levels: int, hidden: int | None = None
    ) -> "SeeQueryState":
        hidden = dim if hidden is None else hidden
        return cls(
            rng.normal(0.0, 1.0 / np.sqrt(dim), dim),
            MlpParams.random(rng, dim, hidden, num_levels),
        )


@dataclass(frozen=True)
class DecoderLayerParams:
    """Self- and cross-attention projections for one decoder layer."""

    self_attn: AttentionParams
    cross_attn: AttentionParams

    def __post_init__(self):
        if self.self_attn.dim != self.cross_attn.dim:
            raise ShapeError("self and cross attention dims differ")


@dataclass(frozen=True)
class DecoderParams:
    """Per-layer attention parameters of the decoder stack."""

    layers: tuple[DecoderLayerParams, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        dims = {lp.self_attn.dim for lp in layers}
        if len(dims) > 1:
            raise ShapeError(f"decoder layers disagree on model dim: {sorted(dims)}")
        object.__setattr__(self, "layers", layers)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @classmethod
    def random(
        cls, rng: np.random.Generator, dim: int, heads: int, num_layers: int
    ) -> "DecoderParams":
        return cls(
            tuple(
                DecoderLayerParams(
                    AttentionParams.random(rng, dim, heads),
                    AttentionParams.random(rng, dim, heads),
                )
                for _ in range(num_layers)
            )
        )


@dataclass(frozen=True)
class HeadParams:
    """Detection head projections: class logits (C x num_classes), box (C x 7)."""

    w_class: np.ndarray
    w_box: np.ndarray

    def __post_init__(self):
        wc = as_float_array(self.w_class, "w_class", ndim=2)
        wb = as_float_array(self.w_box, "w_box", ndim=2)
        if wb.shape != (wc.shape[0], 7):
            raise ShapeError(
                f"w_box must be ({wc.shape[0]}, 7) to match w_class {wc.shape}, got {wb.shape}"
            )
        if wc.shape[1] < 1:
            raise ShapeError("need at least one class")
        object.__setattr__(self, "w_class", wc)
        object.__setattr__(self, "w_box", wb)

    @property
    def num_classes(self) -> int:
        return self.w_class.shape[1]

    @classmethod
    def zeros(cls, dim: int, num_classes: int) -> "HeadParams":
        return cls(np.zeros((dim, num_classes)), np.zeros((dim, 7)))

    @classmethod
    def random(cls, rng: np.random.Generator, dim: int, num_classes: int) -> "HeadParams":
        scale = 1.0 / np.sqrt(dim)
        return cls(
            rng.normal(0.0, scale, (dim, num_classes)),
            rng.normal(0.0, scale, (dim, 7)),
        )


def see_weights(state: SeeQueryState) -> np.ndarray:
    """Aggregation weights: softmax of the MLP-transformed see-query.

    Always a point on the probability simplex (nonnegative, sums to one).
    """
    logits = mlp(state.q_see[None, :], state.mlp)[0]
    return softmax_vec(logits)


def aggregate(levels: FeatureLevels, w: np.ndarray) -> np.ndarray:
    """Blend the L feature levels with simplex weights ``w``.

    Each output entry is a convex combination, so it stays inside the
    elementwise [min, max] envelope of the levels; a one-hot ``w``
    reproduces the selected level exactly.
    """
    w = as_float_array(w, "weights", ndim=1)
    if w.shape[0] != levels.num_levels:
        raise ShapeError(
            f"{w.shape[0]} weights for {levels.num_levels} feature levels"
        )
    return np.einsum("l,lnc->nc", w, levels.levels)


def _attend(queries: np.ndarray, target: np.ndarray, params: AttentionParams) -> np.ndarray:
    # Residual around the attention sublayer: zero-initialized value/output
    # projections leave the queries untouched instead of collapsing them.
    return queries + mha(queries, target, target, params)


def decoder_layer(
    queries: np.ndarray,
    levels: FeatureLevels,
    state: SeeQueryState,
    layer: DecoderLayerParams,
) -> tuple[np.ndarray, SeeQueryState]:
    """One decoder layer over the unified (K+1, C) query matrix.

    Row 0 must be the current see-query activation.  The layer derives the
    level weights from it, blends the levels, runs self-attention over all
    K+1 queries and cross-attention against the blend, and returns the
    updated matrix together with the state carrying the new row 0.
    """
    queries = as_float_array(queries, "queries", ndim=2)
    if queries.shape[0] < 1:
        raise ShapeError("unified query matrix needs at least the see-query row")
    if not np.array_equal(queries[0], state.q_see):
        raise ShapeError("row 0 of the unified queries must equal the tracked see-query")

    w = see_weights(state)
    blended = aggregate(levels, w)
    after_self = _attend(queries, queries, layer.self_attn)
    after_cross = _attend(after_self, blended, layer.cross_attn)
    return after_cross, state.with_query(after_cross[0])


def unify_queries(state: SeeQueryState, object_queries: np.ndarray) -> np.ndarray:
    """Stack the see-query on top of the K object queries."""
    object_queries = as_float_array(object_queries, "object queries", ndim=2)
    if object_queries.shape[1] != state.q_see.shape[0]:
        raise ShapeError(
            f"object queries have dim {object_queries.shape[1]}, "
            f"see-query has {state.q_see.shape[0]}"
        )
    return np.vstack([state.q_see[None, :], object_queries])


def decoder_forward(
    object_queries: np.ndarray,
    levels: FeatureLevels,
    state: SeeQueryState,
    params: DecoderParams,
) -> np.ndarray:
    """Run the full decoder stack and return the final (K, C) object queries.

    The see-query row is threaded through every layer (weights rederived
    from its evolving activation) and dropped from the returned matrix.
    """
    queries = unify_queries(state, object_queries)
    for layer in params.layers:
        queries, state = decoder_layer(queries, levels, state, layer)
    return queries[1:]


def decoder_forward_per_layer(
    object_queries: np.ndarray,
    targets: list[np.ndarray],
    params: DecoderParams,
) -> np.ndarray:
    """Decoder stack with a fixed cross-attention target per layer.

    Baseline aggregation policies (final level only, or one level per layer
    shallow to deep) are expressed by the ``targets`` list; no see-query is
    involved.  ``targets`` must supply one feature matrix per decoder layer.
    """
    queries = as_float_array(object_queries, "object queries", ndim=2)
    if len(targets) != params.num_layers:
        raise ShapeError(
            f"{len(targets)} cross-attention targets for {params.num_layers} layers"
        )
    for target, layer in zip(targets, params.layers):
        queries = _attend(queries, queries, layer.self_attn)
        queries = _attend(queries, as_float_array(target, "target", ndim=2), layer.cross_attn)
    return queries


def decoder_trace(
    object_queries: np.ndarray,
    levels: FeatureLevels,
    state: SeeQueryState,
    params: DecoderParams,
) -> tuple[np.ndarray, list[np.ndarray], SeeQueryState]:
    """Like ``decoder_forward`` but also collects the per-layer level weights."""
    queries = unify_queries(state, object_queries)
    per_layer_weights = []
    for layer in params.layers:
        per_layer_weights.append(see_weights(state))
        queries, state = decoder_layer(queries, levels, state, layer)
    return queries[1:], per_layer_weights, state


def detection_head(queries: np.ndarray, head: HeadParams) -> DetectionSet:
    """Decode each query row into a labeled, scored 7-DoF box.

    Class probabilities come from a softmax over the class projection
    (score = best probability, label = argmax).  Box decode: first three
    dims are the center, the next three are log-sizes (exponentiated so
    extents stay positive), the last is yaw wrapped into [-pi, pi).
    """
    queries = as_float_array(queries, "queries", ndim=2)
    if queries.shape[1] != head.w_class.shape[0]:
        raise ShapeError(
            f"queries have dim {queries.shape[1]}, head expects {head.w_class.shape[0]}"
        )
    if queries.shape[0] == 0:
        return DetectionSet.empty()

    probs = softmax_rows(queries @ head.w_class)
    raw = queries @ head.w_box
    boxes = []
    labels = []
    scores = []
    for i in range(queries.shape[0]):
        labels.append(int(np.argmax(probs[i])))
        scores.append(float(probs[i].max()))
        boxes.append(
            Box3D(center=raw[i, :3], size=np.exp(raw[i, 3:6]), yaw=wrap_yaw(raw[i, 6]))
        )
    return DetectionSet(tuple(boxes), tuple(labels), tuple(scores))


def weight_jacobian(state: SeeQueryState) -> np.ndarray:
    """Analytical Jacobian of the level weights w.r.t. the see-query.

    Chain rule through the two-layer MLP and the softmax: with logits
    z = relu(q w1 + b1) w2 + b2 and w = softmax(z),

        dw/dq = (diag(w) - w w^T) @ dz/dq,
        dz/dq = w2^T @ diag(relu'(q w1 + b1)) @ w1^T.

    Shape (L, C).
    """
    p = state.mlp
    pre = state.q_see @ p.w1 + p.b1
    active = (pre > 0).astype(np.float64)
    dz_dq = p.w2.T @ (active[:, None] * p.w1.T)
    w = see_weights(state)
    softmax_jac = np.diag(w) - np.outer(w, w)
    return softmax_jac @ dz_dq


def grad_check_weights(state: SeeQueryState, step: float = 1e-5) -> float:
    """Max relative error between the analytical weight Jacobian and
    central finite differences.

    The error is the largest absolute entry difference divided by the
    largest magnitude appearing in either Jacobian (0.0 when both vanish).
    """
    analytic = weight_jacobian(state)
    dim = state.q_see.shape[0]
    numeric = np.zeros_like(analytic)
    for j in range(dim):
        delta = np.zeros(dim)
        delta[j] = step
        w_plus = see_weights(state.with_query(state.q_see + delta))
        w_minus = see_weights(state.with_query(state.q_see - delta))
        numeric[:, j] = (w_plus - w_minus) / (2.0 * step)
    scale = max(np.abs(analytic).max(), np.abs(numeric).max())
    if scale == 0.0:
        return 0.0
    return float(np.abs(analytic - numeric).max() / scale)
