"""Minimal dense-tensor building blocks for the toy decoder.

Matrices are plain float64 numpy arrays of shape (rows, cols).  The
operations here are the smallest standard pieces a transformer-style
decoder needs: stabilized row softmax, multi-head scaled dot-product
attention, a two-layer rectifier MLP, and a sinusoidal positional
embedding of 3D points.  Everything is a deterministic pure function of
its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ShapeError, as_float_array


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate a finite 2D float64 array."""
    return as_float_array(values, name, ndim=2)


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax over a (rows, cols) matrix, stabilized by
    subtracting each row's maximum."""
    m = as_matrix(m, "softmax input")
    shifted = m - m.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_vec(v: np.ndarray) -> np.ndarray:
    """Softmax of a single logit vector."""
    return softmax_rows(np.asarray(v, dtype=np.float64)[None, :])[0]


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


@dataclass(frozen=True)
class MlpParams:
    """Two-layer perceptron weights: out = relu(x @ w1 + b1) @ w2 + b2."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        w1 = as_float_array(self.w1, "w1", ndim=2)
        b1 = as_float_array(self.b1, "b1", ndim=1)
        w2 = as_float_array(self.w2, "w2", ndim=2)
        b2 = as_float_array(self.b2, "b2", ndim=1)
        if w1.shape[1] != b1.shape[0] or w2.shape[0] != b1.shape[0] or w2.shape[1] != b2.shape[0]:
            raise ShapeError(
                f"inconsistent MLP shapes: w1 {w1.shape}, b1 {b1.shape}, "
                f"w2 {w2.shape}, b2 {b2.shape}"
            )
        for name, arr in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            object.__setattr__(self, name, arr)

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    @classmethod
    def zeros(cls, in_dim: int, hidden: int, out_dim: int) -> "MlpParams":
        return cls(
            np.zeros((in_dim, hidden)),
            np.zeros(hidden),
            np.zeros((hidden, out_dim)),
            np.zeros(out_dim),
        )

    @classmethod
    def random(cls, rng: np.random.Generator, in_dim: int, hidden: int, out_dim: int) -> "MlpParams":
        scale = 1.0 / np.sqrt(in_dim)
        return cls(
            rng.normal(0.0, scale, (in_dim, hidden)),
            rng.normal(0.0, scale, hidden),
            rng.normal(0.0, scale, (hidden, out_dim)),
            rng.normal(0.0, scale, out_dim),
        )


def mlp(x: np.ndarray, p: MlpParams) -> np.ndarray:
    """Apply the two-layer rectifier MLP row-wise."""
    x = as_matrix(x, "mlp input")
    if x.shape[1] != p.in_dim:
        raise ShapeError(f"mlp input has {x.shape[1]} columns, expected {p.in_dim}")
    return relu(x @ p.w1 + p.b1) @ p.w2 + p.b2


@dataclass(frozen=True)
class AttentionParams:
    """Per-head projections for multi-head attention.

    ``wq``, ``wk``, ``wv`` have shape (heads, C, C // heads); ``wo`` is the
    (C, C) output projection applied to the concatenated head outputs.
    """

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray

    def __post_init__(self):
        wq = as_float_array(self.wq, "wq", ndim=3)
        wk = as_float_array(self.wk, "wk", ndim=3)
        wv = as_float_array(self.wv, "wv", ndim=3)
        wo = as_float_array(self.wo, "wo", ndim=2)
        h, c, d = wq.shape
        if wk.shape != (h, c, d) or wv.shape != (h, c, d):
            raise ShapeError("wq, wk, wv must share shape (heads, C, C/heads)")
        if c % h != 0 or d != c // h:
            raise ShapeError(f"model dim {c} must be divisible into {h} heads of width {d}")
        if wo.shape != (c, c):
            raise ShapeError(f"wo must be ({c}, {c}), got {wo.shape}")
        for name, arr in (("wq", wq), ("wk", wk), ("wv", wv), ("wo", wo)):
            object.__setattr__(self, name, arr)

    @property
    def heads(self) -> int:
        return self.wq.shape[0]

    @property
    def dim(self) -> int:
        return self.wq.shape[1]

    @property
    def head_dim(self) -> int:
        return self.wq.shape[2]

    @classmethod
    def identity(cls, dim: int) -> "AttentionParams":
        """Single head with identity projections; useful in tests."""
        eye = np.eye(dim)
        return cls(eye[None], eye[None], eye[None], eye)

    @classmethod
    def zero_valued(cls, rng: np.random.Generator, dim: int, heads: int) -> "AttentionParams":
        """Random q/k projections but zero value/output paths.

        With residual connections this makes an attention sublayer an exact
        identity, which tests exploit.
        """
        base = cls.random(rng, dim, heads)
        return cls(base.wq, base.wk, np.zeros_like(base.wv), np.zeros_like(base.wo))

    @classmethod
    def random(cls, rng: np.random.Generator, dim: int, heads: int) -> "AttentionParams":
        if dim % heads != 0:
            raise ShapeError(f"dim {dim} not divisible by {heads} heads")
        d = dim // heads
        scale = 1.0 / np.sqrt(dim)
        shape = (heads, dim, d)
        return cls(
            rng.normal(0.0, scale, shape),
            rng.normal(0.0, scale, shape),
            rng.normal(0.0, scale, shape),
            rng.normal(0.0, scale, (dim, dim)),
        )


def mha(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    params: AttentionParams,
    return_weights: bool = False,
):
    """Multi-head scaled dot-product attention.

    ``q`` is (Nq, C); ``k`` and ``v`` are (Nk, C).  Scores are scaled by
    1/sqrt(C/heads).  Returns the (Nq, C) output, plus the per-head weight
    tensor (heads, Nq, Nk) when ``return_weights`` is set.
    """
    q = as_matrix(q, "q")
    k = as_matrix(k, "k")
    v = as_matrix(v, "v")
    c = params.dim
    if q.shape[1] != c or k.shape[1] != c or v.shape[1] != c:
        raise ShapeError(f"q/k/v must have {c} columns")
    if k.shape[0] != v.shape[0]:
        raise ShapeError(f"k has {k.shape[0]} rows but v has {v.shape[0]}")

    scale = 1.0 / np.sqrt(params.head_dim)
    head_outputs = []
    head_weights = []
    for i in range(params.heads):
        qh = q @ params.wq[i]
        kh = k @ params.wk[i]
        vh = v @ params.wv[i]
        weights = softmax_rows(qh @ kh.T * scale)
        head_weights.append(weights)
        head_outputs.append(weights @ vh)
    out = np.concatenate(head_outputs, axis=1) @ params.wo
    if return_weights:
        return out, np.stack(head_weights)
    return out


def embed_points(points, dim: int) -> np.ndarray:
    """Sinusoidal Fourier features of 3D points.

    For each axis and each frequency band ``2**j`` (j = 0 .. dim//6 - 1) the
    embedding carries one sine and one cosine of the scaled coordinate,
    laid out axis-major: all bands of x, then y, then z.  When ``dim`` is
    not divisible by 6, the trailing ``dim % 6`` columns are zero.
    """
    pts = as_float_array(points, "points", ndim=2)
    if pts.shape[1] != 3:
        raise ShapeError(f"points must be (K, 3), got {pts.shape}")
    if dim % 2 != 0 or dim < 6:
        raise ShapeError(f"embedding dim must be even and >= 6, got {dim}")

    bands = dim // 6
    freqs = 2.0 ** np.arange(bands)
    angles = pts[:, :, None] * freqs  # (K, 3, bands)
    out = np.zeros((pts.shape[0], dim))
    per_axis = 2 * bands
    for axis in range(3):
        out[:, axis * per_axis : axis * per_axis + per_axis : 2] = np.sin(angles[:, axis, :])
        out[:, axis * per_axis + 1 : axis * per_axis + per_axis : 2] = np.cos(angles[:, axis, :])
    return out
