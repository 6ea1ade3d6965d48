"""Cell-selection strategies: score top-k, box-prior rectangles, and
byte-budget trimming."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import AabbBEV, FeatureMap, GridSpec


@dataclass(frozen=True)
class PriorMap:
    """Binary grid marking cells covered by prior box rectangles."""

    binary: np.ndarray

    def __post_init__(self) -> None:
        binary = np.ascontiguousarray(self.binary, dtype=bool)
        if binary.ndim != 2:
            raise ValueError("prior map must be a 2-D grid")
        binary.flags.writeable = False
        object.__setattr__(self, "binary", binary)


@dataclass(frozen=True)
class SelectionMatrix:
    """Binary cell-selection grid plus its originating strategy tag.

    Known tags: "topk", "gtfs", "confidence", "budget-trimmed".
    """

    binary: np.ndarray
    count: int
    strategy: str

    def __post_init__(self) -> None:
        binary = np.ascontiguousarray(self.binary, dtype=bool)
        if binary.ndim != 2:
            raise ValueError("selection must be a 2-D grid")
        if int(binary.sum()) != self.count:
            raise ValueError("selection count does not match mask")
        if not self.strategy:
            raise ValueError("selection needs a strategy tag")
        binary.flags.writeable = False
        object.__setattr__(self, "binary", binary)

    @staticmethod
    def from_mask(binary: np.ndarray, strategy: str) -> "SelectionMatrix":
        mask = np.asarray(binary, dtype=bool)
        return SelectionMatrix(mask, int(mask.sum()), strategy)


def _stable_desc_order(flat_scores: np.ndarray) -> np.ndarray:
    # stable sort on negated scores: ties fall back to ascending
    # (row, col) order because flat indices are row-major
    return np.argsort(-flat_scores, kind="stable")


def topk_select(scores: np.ndarray, k: int) -> SelectionMatrix:
    """Select the k highest-score cells; ties break toward ascending
    (row, col) so selection is reproducible."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ValueError("scores must be a 2-D grid")
    if k < 0:
        raise ValueError("k must be non-negative")
    n = scores.size
    k = min(k, n)
    mask = np.zeros(n, dtype=bool)
    if k > 0:
        order = _stable_desc_order(scores.ravel())
        mask[order[:k]] = True
    return SelectionMatrix(mask.reshape(scores.shape), k, "topk")


def build_prior_map(
    boxes: Sequence[AabbBEV], spec: GridSpec
) -> tuple[PriorMap, int]:
    """Paint half-open grid rectangles for each box envelope.

    Boxes are clipped to the grid; a box whose rectangle collapses
    within the grid still covers one cell, and a box entirely outside
    is skipped.  Returns the map and the skip tally.
    """
    grid = np.zeros((spec.rows, spec.cols), dtype=bool)
    skipped = 0
    for box in boxes:
        r1 = math.floor((box.x1 - spec.x_min) / spec.cell_x)
        r2 = math.floor((box.x2 - spec.x_min) / spec.cell_x)
        c1 = math.floor((box.y1 - spec.y_min) / spec.cell_y)
        c2 = math.floor((box.y2 - spec.y_min) / spec.cell_y)
        if r2 == r1:
            r2 += 1
        if c2 == c1:
            c2 += 1
        r1c, r2c = max(r1, 0), min(r2, spec.rows)
        c1c, c2c = max(c1, 0), min(c2, spec.cols)
        if r1c >= r2c or c1c >= c2c:
            skipped += 1
            continue
        grid[r1c:r2c, c1c:c2c] = True
    return PriorMap(grid), skipped


def gtfs_features(prior: PriorMap, features: FeatureMap) -> FeatureMap:
    """Keep features only on prior-map cells (channel-broadcast product)."""
    if prior.binary.shape != (features.spec.rows, features.spec.cols):
        raise ValueError("prior map does not match feature grid")
    return FeatureMap(features.values * prior.binary[None, :, :], features.spec)


def budget_select(
    sel: SelectionMatrix,
    scores: np.ndarray,
    budget_bytes: int,
    bytes_per_cell: int,
) -> SelectionMatrix:
    """Trim a selection to fit a byte budget.

    Under budget the selection is returned untouched; otherwise the
    floor(budget / bytes_per_cell) highest-score selected cells
    survive, with the top-k tie rule.
    """
    if bytes_per_cell <= 0:
        raise ValueError("bytes per cell must be positive")
    if budget_bytes < 0:
        raise ValueError("budget must be non-negative")
    if sel.count * bytes_per_cell <= budget_bytes:
        return sel
    keep = budget_bytes // bytes_per_cell
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != sel.binary.shape:
        raise ValueError("scores grid does not match selection")
    flat_sel = np.nonzero(sel.binary.ravel())[0]
    order = _stable_desc_order(scores.ravel()[flat_sel])
    mask = np.zeros(scores.size, dtype=bool)
    mask[flat_sel[order[:keep]]] = True
    return SelectionMatrix(mask.reshape(scores.shape), int(keep), "budget-trimmed")
