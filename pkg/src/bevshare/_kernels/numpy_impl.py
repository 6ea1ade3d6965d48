"""Reference numpy implementation of the hot kernels.

The compiled backend in ``_cykernels.pyx`` mirrors these signatures
exactly; tests assert the two backends agree to near machine
precision (single-token cells bitwise).
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-9


def fuse_cells(tokens: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Per-cell scaled-dot-product self-attention, first token as query.

    ``tokens`` is a ragged stack of shape (T, C): rows
    ``offsets[i]:offsets[i+1]`` belong to cell ``i``, ego token first.
    Returns one fused C-vector per cell.  Cells with a single token are
    passed through as exact copies.
    """
    tokens = np.ascontiguousarray(tokens, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    n_cells = offsets.shape[0] - 1
    channels = tokens.shape[1]
    out = np.empty((n_cells, channels), dtype=np.float64)

    sizes = np.diff(offsets)
    scale = 1.0 / np.sqrt(channels)
    # batch cells of equal token count so the fallback stays vectorized
    for m in np.unique(sizes):
        idx = np.nonzero(sizes == m)[0]
        if m == 1:
            out[idx] = tokens[offsets[idx]]
            continue
        gather = offsets[idx, None] + np.arange(m)[None, :]
        tok = tokens[gather]                       # (n, m, C)
        query = tok[:, 0, :]                       # (n, C)
        logits = np.einsum("nmc,nc->nm", tok, query) * scale
        logits -= logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
        weights /= weights.sum(axis=1, keepdims=True)
        out[idx] = np.einsum("nm,nmc->nc", weights, tok)
    return out


def _edge_frame(quads: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inward edge normals and anchor points for CCW quads (K, 4, 2)."""
    nxt = np.roll(quads, -1, axis=1)
    edge = nxt - quads
    normals = np.stack([-edge[..., 1], edge[..., 0]], axis=-1)
    return normals, quads


def visibility(centers: np.ndarray, quads: np.ndarray, origin: np.ndarray) -> np.ndarray:
    """Line-of-sight test from ``origin`` to each cell center.

    A center is occluded when some convex quad intersects the sight
    segment strictly between the two endpoints: the segment-parameter
    interval clipped by the quad's half-planes must have positive length
    and end before the center.  A center inside a quad keeps sight of
    itself because the clipped interval then reaches t = 1.
    """
    centers = np.asarray(centers, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    if quads.shape[0] == 0:
        return np.ones(centers.shape[0], dtype=bool)
    quads = np.asarray(quads, dtype=np.float64)

    normals, anchors = _edge_frame(quads)
    base = np.einsum("ket,ket->ke", normals, origin[None, None, :] - anchors)  # (K, 4)
    direction = centers - origin[None, :]                                # (N, 2)
    slope = np.einsum("nt,ket->nke", direction, normals)                 # (N, K, 4)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_cross = -base[None, :, :] / slope
    lo = np.where(slope > 0, t_cross, -np.inf)
    hi = np.where(slope < 0, t_cross, np.inf)
    dead = (slope == 0) & (base[None, :, :] < 0)

    t0 = np.maximum(lo.max(axis=2), 0.0)
    t1 = np.minimum(hi.min(axis=2), 1.0)
    blocked = ~dead.any(axis=2) & (t1 - t0 > _EPS) & (t1 < 1.0 - _EPS)
    return ~blocked.any(axis=1)


def _clip_halfplane(poly: list[tuple[float, float]], ax: float, ay: float,
                    nx: float, ny: float) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    n = len(poly)
    for i in range(n):
        px, py = poly[i]
        qx, qy = poly[(i + 1) % n]
        dp = nx * (px - ax) + ny * (py - ay)
        dq = nx * (qx - ax) + ny * (qy - ay)
        if dp >= 0.0:
            out.append((px, py))
            if dq < 0.0:
                t = dp / (dp - dq)
                out.append((px + t * (qx - px), py + t * (qy - py)))
        elif dq >= 0.0:
            t = dp / (dp - dq)
            out.append((px + t * (qx - px), py + t * (qy - py)))
    return out


def _shoelace(poly: list[tuple[float, float]]) -> float:
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * abs(acc)


def quad_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection-over-union of two convex CCW quads via polygon clipping."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    poly = [(float(x), float(y)) for x, y in a]
    for i in range(4):
        ax_, ay_ = float(b[i, 0]), float(b[i, 1])
        bx_, by_ = float(b[(i + 1) % 4, 0]), float(b[(i + 1) % 4, 1])
        poly = _clip_halfplane(poly, ax_, ay_, -(by_ - ay_), bx_ - ax_)
        if not poly:
            break
    inter = _shoelace(poly)
    area_a = _shoelace([(float(x), float(y)) for x, y in a])
    area_b = _shoelace([(float(x), float(y)) for x, y in b])
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return inter / union
