"""Forward-pass attention: softmax and normalized linear kernels, residual
self/cross blocks, and the self -> cross -> self descriptor enhancement stack.

Everything here is pure matrix math on (N, d) token matrices. There is no
training; weights are deterministic Gaussian draws or loaded from file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyCloud, ShapeMismatch
from .rgbd import FeatureCloud

_BLOCK_NAMES = ["self_support", "self_query", "cross_support", "cross_query",
                "post_self_support", "post_self_query"]
_MATRIX_NAMES = ["query", "key", "value", "out"]


def _as_tokens(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 2:
        raise ShapeMismatch(f"token matrix must be 2D, got shape {a.shape}")
    return a


def _check_qkv(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> None:
    if q.shape[1] != k.shape[1]:
        raise ShapeMismatch(f"query dim {q.shape[1]} != key dim {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ShapeMismatch(f"{k.shape[0]} keys vs {v.shape[0]} values")


def softmax_attention(q, k, v) -> np.ndarray:
    """Row-wise softmax(q k^T) v, stabilized by row-max subtraction."""
    q, k, v = _as_tokens(q), _as_tokens(k), _as_tokens(v)
    _check_qkv(q, k, v)
    s = q @ k.T
    s -= s.max(axis=1, keepdims=True)
    e = np.exp(s)
    w = e / e.sum(axis=1, keepdims=True)
    return w @ v


def elu_feature_map(x: np.ndarray) -> np.ndarray:
    """phi(x) = elu(x) + 1, strictly positive."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x + 1.0, np.exp(np.minimum(x, 0.0)))


def linear_attention(q, k, v) -> np.ndarray:
    """Normalized linear attention with phi(x) = elu(x) + 1.

    Row i of the output is phi(q_i) (sum_j phi(k_j) v_j^T) / (phi(q_i) . sum_j
    phi(k_j)); associativity keeps the cost at O(N d^2) while matching the
    explicit quadratic form. A single key/value row passes through unchanged.
    """
    q, k, v = _as_tokens(q), _as_tokens(k), _as_tokens(v)
    _check_qkv(q, k, v)
    if k.shape[0] == 1:
        # weights are exactly 1; copy the row bit-for-bit
        return np.tile(v[0], (q.shape[0], 1))
    fq = elu_feature_map(q)
    fk = elu_feature_map(k)
    kv = fk.T @ v
    ksum = fk.sum(axis=0)
    return (fq @ kv) / (fq @ ksum)[:, None]


@dataclass(frozen=True)
class BlockWeights:
    """Projection matrices of one attention block, each (d, d)."""

    query: np.ndarray
    key: np.ndarray
    value: np.ndarray
    out: np.ndarray

    def __post_init__(self):
        for name in _MATRIX_NAMES:
            m = np.asarray(getattr(self, name), dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ShapeMismatch(f"{name} projection must be square, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} projection has non-finite entries")
            object.__setattr__(self, name, m)
        dims = {getattr(self, n).shape[0] for n in _MATRIX_NAMES}
        if len(dims) != 1:
            raise ShapeMismatch(f"inconsistent projection dims {dims}")

    @property
    def dim(self) -> int:
        return self.query.shape[0]


def self_attention_block(tokens, weights: BlockWeights) -> np.ndarray:
    """tokens + linear_attention(t Wq, t Wk, t Wv) Wo (residual form)."""
    t = _as_tokens(tokens)
    if t.shape[1] != weights.dim:
        raise ShapeMismatch(f"tokens dim {t.shape[1]} != weights dim {weights.dim}")
    attended = linear_attention(t @ weights.query, t @ weights.key, t @ weights.value)
    return t + attended @ weights.out


def cross_attention_block(target, context, weights: BlockWeights) -> np.ndarray:
    """target + linear_attention(target Wq, context Wk, context Wv) Wo."""
    t = _as_tokens(target)
    c = _as_tokens(context)
    if t.shape[1] != weights.dim or c.shape[1] != weights.dim:
        raise ShapeMismatch("token dims disagree with weights dim")
    attended = linear_attention(t @ weights.query, c @ weights.key, c @ weights.value)
    return t + attended @ weights.out


@dataclass(frozen=True)
class AttentionWeights:
    """All projection matrices of the enhancement stack, immutable after load."""

    dim: int
    self_support: BlockWeights
    self_query: BlockWeights
    cross_support: BlockWeights
    cross_query: BlockWeights
    post_self_support: BlockWeights
    post_self_query: BlockWeights
    seed: int | None = None
    version: int = 1

    def __post_init__(self):
        for name in _BLOCK_NAMES:
            if getattr(self, name).dim != self.dim:
                raise ShapeMismatch(f"block {name} dim != {self.dim}")

    @classmethod
    def random(cls, dim: int, seed: int = 0) -> "AttentionWeights":
        """Deterministic Gaussian initialization with sigma = 1/sqrt(dim)."""
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(dim)
        blocks = {name: BlockWeights(*(rng.normal(0.0, scale, (dim, dim))
                                       for _ in _MATRIX_NAMES))
                  for name in _BLOCK_NAMES}
        return cls(dim=dim, seed=seed, **blocks)

    @classmethod
    def zeros(cls, dim: int) -> "AttentionWeights":
        z = np.zeros((dim, dim))
        blocks = {name: BlockWeights(z, z, z, z) for name in _BLOCK_NAMES}
        return cls(dim=dim, seed=None, **blocks)

    def save(self, path) -> None:
        payload = {"descriptor_dim": self.dim, "seed": self.seed,
                   "version": self.version, "blocks": {}}
        for name in _BLOCK_NAMES:
            block = getattr(self, name)
            payload["blocks"][name] = {m: getattr(block, m).tolist()
                                       for m in _MATRIX_NAMES}
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path) -> "AttentionWeights":
        payload = json.loads(Path(path).read_text())
        blocks = {name: BlockWeights(**{m: np.asarray(mat, dtype=float)
                                        for m, mat in payload["blocks"][name].items()})
                  for name in _BLOCK_NAMES}
        return cls(dim=int(payload["descriptor_dim"]), seed=payload["seed"],
                   version=int(payload["version"]), **blocks)


def _l2_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms < 1e-12] = 1.0
    return x / norms


def enhance(support: FeatureCloud, query: FeatureCloud,
            weights: AttentionWeights) -> tuple[FeatureCloud, FeatureCloud]:
    """Self -> bidirectional cross -> self enhancement of both descriptor sets.

    Only descriptors change; points and pixel provenance pass through
    untouched. Outputs are L2-normalized. Both cross blocks read the same
    post-self snapshots, so swapping (support, query) under mirrored weights
    swaps the outputs exactly.
    """
    ds = support.descriptors
    dq = query.descriptors
    if len(ds) == 0 or len(dq) == 0:
        raise EmptyCloud("enhance needs non-empty feature clouds")
    if ds.shape[1] != dq.shape[1] or ds.shape[1] != weights.dim:
        raise ShapeMismatch("descriptor dims disagree with weights dim")
    s1 = self_attention_block(ds, weights.self_support)
    q1 = self_attention_block(dq, weights.self_query)
    s2 = cross_attention_block(s1, q1, weights.cross_support)
    q2 = cross_attention_block(q1, s1, weights.cross_query)
    s3 = self_attention_block(s2, weights.post_self_support)
    q3 = self_attention_block(q2, weights.post_self_query)
    return (FeatureCloud(support.points, _l2_rows(s3), support.source_pixels),
            FeatureCloud(query.points, _l2_rows(q3), query.source_pixels))
