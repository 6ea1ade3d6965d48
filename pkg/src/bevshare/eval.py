"""Detection decoding, NMS, and average-precision scoring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .confidence import HeadParams, prior_head
from .grid import AabbBEV, FeatureMap, QuadBEV, iou_aabb, iou_rotated


@dataclass(frozen=True)
class Detection:
    quad: QuadBEV
    aabb: AabbBEV
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("detection score must lie in [0, 1]")


@dataclass(frozen=True)
class PrCurve:
    """Precision/recall points in detection-rank order plus the AP."""

    recalls: np.ndarray
    precisions: np.ndarray
    ap: float

    def __post_init__(self) -> None:
        recalls = np.ascontiguousarray(self.recalls, dtype=np.float64)
        precisions = np.ascontiguousarray(self.precisions, dtype=np.float64)
        if recalls.shape != precisions.shape or recalls.ndim != 1:
            raise ValueError("recall/precision arrays must be matching 1-D")
        if recalls.size and np.any(np.diff(recalls) < 0.0):
            raise ValueError("recall must be nondecreasing")
        if not 0.0 <= self.ap <= 1.0:
            raise ValueError("AP must lie in [0, 1]")
        recalls.flags.writeable = False
        precisions.flags.writeable = False
        object.__setattr__(self, "recalls", recalls)
        object.__setattr__(self, "precisions", precisions)


_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def _components(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """8-connected components in row-major discovery order."""
    rows, cols = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps: list[list[tuple[int, int]]] = []
    for r0 in range(rows):
        for c0 in range(cols):
            if not mask[r0, c0] or seen[r0, c0]:
                continue
            stack = [(r0, c0)]
            seen[r0, c0] = True
            cells: list[tuple[int, int]] = []
            while stack:
                r, c = stack.pop()
                cells.append((r, c))
                for dr, dc in _NEIGHBORS:
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < rows and 0 <= cc < cols:
                        if mask[rr, cc] and not seen[rr, cc]:
                            seen[rr, cc] = True
                            stack.append((rr, cc))
            comps.append(cells)
    return comps


def decode_detections(
    fused: FeatureMap, params: HeadParams, score_thresh: float
) -> list[Detection]:
    """Threshold the head's foreground score and box each 8-connected
    component by its cell extent; component max score becomes the
    detection score."""
    logits = prior_head(fused, params).logits
    scores = 1.0 / (1.0 + np.exp(-(logits[1] - logits[0])))
    mask = scores >= score_thresh
    spec = fused.spec

    out: list[Detection] = []
    for cells in _components(mask):
        rs = [r for r, _ in cells]
        cs = [c for _, c in cells]
        x1 = spec.x_min + min(rs) * spec.cell_x
        x2 = spec.x_min + (max(rs) + 1) * spec.cell_x
        y1 = spec.y_min + min(cs) * spec.cell_y
        y2 = spec.y_min + (max(cs) + 1) * spec.cell_y
        peak = max(float(scores[r, c]) for r, c in cells)
        quad = QuadBEV(np.array([[x1, y1], [x2, y1], [x2, y2], [x1, y2]]))
        out.append(Detection(quad=quad, aabb=AabbBEV(x1, y1, x2, y2), score=peak))
    return out


def nms(dets: Sequence[Detection], iou_thresh: float) -> list[Detection]:
    """Greedy suppression by descending score; ties keep list order."""
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    kept: list[Detection] = []
    for i in order:
        cand = dets[i]
        if all(iou_rotated(cand.quad, k.quad) < iou_thresh for k in kept):
            kept.append(cand)
    return kept


def average_precision(
    dets: Sequence[Detection], gts: Sequence[AabbBEV], iou_thresh: float
) -> PrCurve:
    """Score-descending greedy matching and 11-point interpolated AP.

    Each detection claims the highest-IoU still-unmatched GT envelope
    (at or above the threshold).  Conventions: no GT and no detections
    scores 1.0; no GT with detections scores 0.0.
    """
    n_gt = len(gts)
    if n_gt == 0 and len(dets) == 0:
        return PrCurve(np.zeros(0), np.zeros(0), 1.0)

    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    matched = [False] * n_gt
    tp = np.zeros(len(dets))
    for rank, i in enumerate(order):
        best_iou, best_j = 0.0, -1
        for j in range(n_gt):
            if matched[j]:
                continue
            iou = iou_aabb(dets[i].aabb, gts[j])
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= iou_thresh:
            matched[best_j] = True
            tp[rank] = 1.0

    cum_tp = np.cumsum(tp)
    ranks = np.arange(1, len(dets) + 1)
    precisions = cum_tp / ranks
    recalls = cum_tp / n_gt if n_gt > 0 else np.zeros(len(dets))
    if n_gt == 0:
        return PrCurve(recalls, precisions, 0.0)

    ap = 0.0
    for r in np.linspace(0.0, 1.0, 11):
        above = precisions[recalls >= r - 1e-12]
        ap += float(above.max()) if above.size else 0.0
    return PrCurve(recalls, precisions, ap / 11.0)
