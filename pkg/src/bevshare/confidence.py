"""Confidence-map generation: attention over per-cell agent tokens,
a fixed classification head, and score thresholding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .grid import FeatureMap


def scaled_dot_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """softmax(q k^T / sqrt(d)) v with rows of q as queries.

    q is (n, d), k is (m, d), v is (m, dv).  Softmax rows sum to one
    to within accumulated rounding (<= 1e-9 for sane sizes).
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ValueError("attention inputs must be 2-D")
    if q.shape[1] != k.shape[1]:
        raise ValueError("query and key width differ")
    if k.shape[0] != v.shape[0]:
        raise ValueError("key and value row counts differ")
    logits = q @ k.T / math.sqrt(q.shape[1])
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    return weights @ v


def afm_fuse(features: Sequence[FeatureMap], ego_idx: int) -> FeatureMap:
    """Fuse same-grid feature maps cell by cell with ego-queried attention.

    Each agent contributes one C-token per cell; the ego token is the
    query and every token (ego included) is a key and value.  A single
    input map passes through unchanged.
    """
    if len(features) == 0:
        raise ValueError("need at least one feature map")
    if not 0 <= ego_idx < len(features):
        raise IndexError("ego index out of range")
    first = features[0]
    shape = first.values.shape
    for f in features[1:]:
        if f.values.shape != shape or f.spec != first.spec:
            raise ValueError("feature maps must share channels and grid")

    ordered = [features[ego_idx]] + [
        f for i, f in enumerate(features) if i != ego_idx
    ]
    m = len(ordered)
    channels, rows, cols = shape
    n_cells = rows * cols
    # (m, C, H, W) -> per-cell contiguous token blocks, ego first
    stack = np.stack([f.values for f in ordered])
    tokens = stack.transpose(2, 3, 0, 1).reshape(n_cells * m, channels)
    offsets = np.arange(n_cells + 1, dtype=np.int64) * m
    fused = _kernels.fuse_cells(tokens, offsets)
    out = np.asarray(fused).reshape(rows, cols, channels).transpose(2, 0, 1)
    return FeatureMap(out, first.spec)


@dataclass(frozen=True)
class HeadParams:
    """Fixed affine classification head: C channels -> (background,
    foreground) logits per cell."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if weights.ndim != 2 or weights.shape[0] != 2:
            raise ValueError("head weights must be (2, channels)")
        if bias.shape != (2,):
            raise ValueError("head bias must have two entries")
        weights.flags.writeable = False
        bias.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @staticmethod
    def evidence_head(channels: int, scale: float, bias: float) -> "HeadParams":
        """Foreground logit = scale * channel0 + bias, background logit = 0."""
        weights = np.zeros((2, channels), dtype=np.float64)
        weights[1, 0] = scale
        return HeadParams(weights, np.array([0.0, bias], dtype=np.float64))


@dataclass(frozen=True)
class PriorHeadOutput:
    """Per-cell (background, foreground) logits, shape (2, rows, cols)."""

    logits: np.ndarray

    def __post_init__(self) -> None:
        logits = np.ascontiguousarray(self.logits, dtype=np.float64)
        if logits.ndim != 3 or logits.shape[0] != 2:
            raise ValueError("logits must be (2, rows, cols)")
        if not np.all(np.isfinite(logits)):
            raise ValueError("logits must be finite")
        logits.flags.writeable = False
        object.__setattr__(self, "logits", logits)


def prior_head(fused: FeatureMap, params: HeadParams) -> PriorHeadOutput:
    """Apply the per-cell affine head to a fused feature map."""
    if params.weights.shape[1] != fused.channels:
        raise ValueError("head width does not match feature channels")
    logits = np.einsum("oc,chw->ohw", params.weights, fused.values)
    logits += params.bias[:, None, None]
    return PriorHeadOutput(logits)


@dataclass(frozen=True)
class ConfidenceMap:
    scores: np.ndarray
    binary: np.ndarray
    threshold: float

    def __post_init__(self) -> None:
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        binary = np.ascontiguousarray(self.binary, dtype=bool)
        if scores.shape != binary.shape or scores.ndim != 2:
            raise ValueError("scores and binary must be matching 2-D grids")
        if np.any((scores < 0.0) | (scores > 1.0)):
            raise ValueError("scores must lie in [0, 1]")
        if not np.array_equal(binary, scores >= self.threshold):
            raise ValueError("binary mask must equal scores >= threshold")
        scores.flags.writeable = False
        binary.flags.writeable = False
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "binary", binary)


def generate_confidence(
    fused: FeatureMap, params: HeadParams, t: float
) -> ConfidenceMap:
    """Logistic foreground-vs-background score per cell, thresholded at t."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    logits = prior_head(fused, params).logits
    margin = logits[1] - logits[0]
    scores = 1.0 / (1.0 + np.exp(-margin))
    return ConfidenceMap(scores=scores, binary=scores >= t, threshold=t)


def mask_features(conf: ConfidenceMap, features: FeatureMap) -> FeatureMap:
    """Zero every cell whose confidence is below threshold."""
    if conf.binary.shape != (features.spec.rows, features.spec.cols):
        raise ValueError("confidence grid does not match feature grid")
    masked = features.values * conf.binary[None, :, :]
    return FeatureMap(masked, features.spec)
