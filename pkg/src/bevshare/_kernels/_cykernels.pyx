# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; reference semantics live in numpy_impl."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

cdef double _EPS = 1e-9


def fuse_cells(tokens_in, offsets_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] tokens = \
        np.ascontiguousarray(tokens_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] offsets = \
        np.ascontiguousarray(offsets_in, dtype=np.int64)
    cdef Py_ssize_t n_cells = offsets.shape[0] - 1
    cdef Py_ssize_t channels = tokens.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] out = \
        np.empty((n_cells, channels), dtype=np.float64)

    cdef Py_ssize_t m_max = 1, i, j, c, start, m
    for i in range(n_cells):
        if offsets[i + 1] - offsets[i] > m_max:
            m_max = offsets[i + 1] - offsets[i]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch = np.empty(m_max, dtype=np.float64)

    cdef double scale = 1.0 / sqrt(<double>channels)
    cdef double acc, peak, total, w
    for i in range(n_cells):
        start = offsets[i]
        m = offsets[i + 1] - start
        if m == 1:
            for c in range(channels):
                out[i, c] = tokens[start, c]
            continue
        peak = -1e308
        for j in range(m):
            acc = 0.0
            for c in range(channels):
                acc += tokens[start + j, c] * tokens[start, c]
            acc *= scale
            scratch[j] = acc
            if acc > peak:
                peak = acc
        total = 0.0
        for j in range(m):
            w = exp(scratch[j] - peak)
            scratch[j] = w
            total += w
        for c in range(channels):
            out[i, c] = 0.0
        for j in range(m):
            w = scratch[j] / total
            for c in range(channels):
                out[i, c] += w * tokens[start + j, c]
    return out


def visibility(centers_in, quads_in, origin_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] centers = \
        np.ascontiguousarray(centers_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] quads = \
        np.ascontiguousarray(quads_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] origin = \
        np.ascontiguousarray(origin_in, dtype=np.float64)
    cdef Py_ssize_t n = centers.shape[0]
    cdef Py_ssize_t k_quads = quads.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1, cast=True] out = \
        np.ones(n, dtype=np.bool_)
    if k_quads == 0:
        return out

    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] normals = \
        np.empty((k_quads, 4, 2), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] base = \
        np.empty((k_quads, 4), dtype=np.float64)
    cdef Py_ssize_t k, e, i
    cdef double ax, ay, bx, by, nx, ny
    for k in range(k_quads):
        for e in range(4):
            ax = quads[k, e, 0]
            ay = quads[k, e, 1]
            bx = quads[k, (e + 1) % 4, 0]
            by = quads[k, (e + 1) % 4, 1]
            nx = -(by - ay)
            ny = bx - ax
            normals[k, e, 0] = nx
            normals[k, e, 1] = ny
            base[k, e] = nx * (origin[0] - ax) + ny * (origin[1] - ay)

    cdef double dx, dy, slope, t0, t1, tc
    cdef bint dead, vis
    for i in range(n):
        dx = centers[i, 0] - origin[0]
        dy = centers[i, 1] - origin[1]
        vis = True
        for k in range(k_quads):
            t0 = 0.0
            t1 = 1.0
            dead = False
            for e in range(4):
                slope = normals[k, e, 0] * dx + normals[k, e, 1] * dy
                if slope > 0.0:
                    tc = -base[k, e] / slope
                    if tc > t0:
                        t0 = tc
                elif slope < 0.0:
                    tc = -base[k, e] / slope
                    if tc < t1:
                        t1 = tc
                elif base[k, e] < 0.0:
                    dead = True
                    break
            if (not dead) and t1 - t0 > _EPS and t1 < 1.0 - _EPS:
                vis = False
                break
        out[i] = vis
    return out


cdef double _shoelace(double *xs, double *ys, int n):
    cdef double acc = 0.0
    cdef int i, j
    if n < 3:
        return 0.0
    for i in range(n):
        j = (i + 1) % n
        acc += xs[i] * ys[j] - xs[j] * ys[i]
    if acc < 0.0:
        acc = -acc
    return 0.5 * acc


def quad_iou(a_in, b_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] a = \
        np.ascontiguousarray(a_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] b = \
        np.ascontiguousarray(b_in, dtype=np.float64)

    # clipping a 4-gon by 4 half-planes yields at most 8 vertices
    cdef double px[16]
    cdef double py[16]
    cdef double qx[16]
    cdef double qy[16]
    cdef double ax4[4]
    cdef double ay4[4]
    cdef double bx4[4]
    cdef double by4[4]
    cdef int n = 4, m, i, j, e
    cdef double ax, ay, bx, by, nx, ny, dp, dq, t, x0, y0, x1, y1

    for i in range(4):
        px[i] = a[i, 0]
        py[i] = a[i, 1]
        ax4[i] = a[i, 0]
        ay4[i] = a[i, 1]
        bx4[i] = b[i, 0]
        by4[i] = b[i, 1]

    for e in range(4):
        if n == 0:
            break
        ax = b[e, 0]
        ay = b[e, 1]
        bx = b[(e + 1) % 4, 0]
        by = b[(e + 1) % 4, 1]
        nx = -(by - ay)
        ny = bx - ax
        m = 0
        for i in range(n):
            j = (i + 1) % n
            x0 = px[i]
            y0 = py[i]
            x1 = px[j]
            y1 = py[j]
            dp = nx * (x0 - ax) + ny * (y0 - ay)
            dq = nx * (x1 - ax) + ny * (y1 - ay)
            if dp >= 0.0:
                qx[m] = x0
                qy[m] = y0
                m += 1
                if dq < 0.0:
                    t = dp / (dp - dq)
                    qx[m] = x0 + t * (x1 - x0)
                    qy[m] = y0 + t * (y1 - y0)
                    m += 1
            elif dq >= 0.0:
                t = dp / (dp - dq)
                qx[m] = x0 + t * (x1 - x0)
                qy[m] = y0 + t * (y1 - y0)
                m += 1
        n = m
        for i in range(n):
            px[i] = qx[i]
            py[i] = qy[i]

    cdef double inter = _shoelace(px, py, n)
    cdef double area_a = _shoelace(ax4, ay4, 4)
    cdef double area_b = _shoelace(bx4, by4, 4)
    cdef double union_ = area_a + area_b - inter
    if union_ <= 0.0:
        return 0.0
    return inter / union_
