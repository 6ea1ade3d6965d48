"""Shared test helpers."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bevshare.grid import GridSpec


def make_spec(rows=12, cols=12, half=6.0) -> GridSpec:
    return GridSpec(rows=rows, cols=cols, x_min=-half, x_max=half,
                    y_min=-half, y_max=half)


def random_quad(rng: np.random.Generator, span: float = 4.0) -> np.ndarray:
    """Random rotated-rectangle corners, CCW, shape (4, 2)."""
    cx, cy = rng.uniform(-span, span, size=2)
    l, w = rng.uniform(1.0, 5.0), rng.uniform(0.8, 3.0)
    t = rng.uniform(-math.pi, math.pi)
    c, s = math.cos(t), math.sin(t)
    local = np.array([[-l, w], [-l, -w], [l, -w], [l, w]]) / 2.0
    return local @ np.array([[c, s], [-s, c]]) + [cx, cy]


def point_in_quad(points: np.ndarray, quad: np.ndarray) -> np.ndarray:
    """Membership of xy points in a convex CCW quad (boundary counts)."""
    points = np.atleast_2d(points)
    inside = np.ones(points.shape[0], dtype=bool)
    for i in range(4):
        a, b = quad[i], quad[(i + 1) % 4]
        edge = b - a
        rel = points - a
        inside &= edge[0] * rel[:, 1] - edge[1] * rel[:, 0] >= -1e-12
    return inside


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
