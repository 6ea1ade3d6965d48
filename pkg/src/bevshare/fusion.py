"""Ego-side aggregation: stack per-cell source tokens, fuse with
self-attention queried by the ego token."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .grid import FeatureMap, GridSpec
from .protocol import MessageKind, WarpResult

EGO_SOURCE = -1


class FusionMode(enum.Enum):
    """Which received payload kinds participate in fusion."""

    TRAIN_LIKE = "train-like"  # confidence-masked and box-prior features
    TEST_LIKE = "test-like"  # confidence-masked features only


@dataclass(frozen=True)
class ReceivedFeatures:
    """One sender's warped entries plus enough header to order them."""

    sender: int
    kind: MessageKind
    entries: WarpResult


@dataclass(frozen=True)
class SourceStack:
    """Ragged per-cell token stacks over the ego grid.

    Cell i owns token rows offsets[i]:offsets[i+1]; the ego token is
    always first, followed by received tokens ordered by ascending
    sender id with confidence-kind before prior-kind.  source_ids
    holds the sender (EGO_SOURCE for ego); kinds holds the payload
    kind byte (0 for ego).
    """

    tokens: np.ndarray
    offsets: np.ndarray
    source_ids: np.ndarray
    kinds: np.ndarray
    spec: GridSpec
    channels: int

    def __post_init__(self) -> None:
        for name in ("tokens", "offsets", "source_ids", "kinds"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def cell_tokens(self, row: int, col: int) -> np.ndarray:
        """Token block of one cell (convenience for tests/inspection)."""
        flat = row * self.spec.cols + col
        return self.tokens[self.offsets[flat] : self.offsets[flat + 1]]


def stack_sources(
    ego_features: FeatureMap,
    received: Sequence[ReceivedFeatures],
    mode: FusionMode,
) -> SourceStack:
    """Build per-cell token stacks from the ego map and received entries.

    Absent sources contribute nothing (no zero padding); in TEST_LIKE
    mode prior-kind payloads are excluded entirely.
    """
    spec = ego_features.spec
    channels = ego_features.channels
    n_cells = spec.rows * spec.cols

    kept = [
        r
        for r in received
        if mode is FusionMode.TRAIN_LIKE or r.kind is MessageKind.CONFIDENCE
    ]
    for r in kept:
        if r.entries.spec != spec:
            raise ValueError("received entries use a different grid")
        if r.entries.features.shape[1] != channels:
            raise ValueError("received entries use a different channel count")
    kept.sort(key=lambda r: (r.sender, 0 if r.kind is MessageKind.CONFIDENCE else 1))

    counts = np.ones(n_cells, dtype=np.int64)
    flats = []
    for r in kept:
        flat = r.entries.rows * spec.cols + r.entries.cols
        flats.append(flat)
        counts[flat] += 1

    offsets = np.zeros(n_cells + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    total = int(offsets[-1])
    tokens = np.empty((total, channels), dtype=np.float64)
    source_ids = np.empty(total, dtype=np.int32)
    kinds = np.zeros(total, dtype=np.uint8)

    cursor = offsets[:-1].copy()
    tokens[cursor] = ego_features.values.reshape(channels, n_cells).T
    source_ids[cursor] = EGO_SOURCE
    cursor += 1
    for r, flat in zip(kept, flats):
        pos = cursor[flat]
        tokens[pos] = r.entries.features.astype(np.float64)
        source_ids[pos] = r.sender
        kinds[pos] = r.kind.value
        cursor[flat] += 1

    return SourceStack(
        tokens=tokens,
        offsets=offsets,
        source_ids=source_ids,
        kinds=kinds,
        spec=spec,
        channels=channels,
    )


def fuse_self_attention(stack: SourceStack) -> FeatureMap:
    """Per-cell scaled-dot-product attention, ego token as the query.

    Single-token cells pass through bit-exact, so an agent that
    receives nothing keeps its own features untouched.
    """
    fused = _kernels.fuse_cells(stack.tokens, stack.offsets)
    spec = stack.spec
    out = np.asarray(fused).reshape(spec.rows, spec.cols, stack.channels)
    return FeatureMap(out.transpose(2, 0, 1), spec)
