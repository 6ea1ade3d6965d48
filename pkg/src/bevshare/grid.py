"""BEV grid geometry: grid spec, box types, transforms, IoU primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class GridSpec:
    """Rectangular BEV grid.

    x spans rows (index 0 at x_min), y spans columns (index 0 at
    y_min).  Cells are half-open intervals [low, high) per axis so
    boundary points bin uniquely.
    """

    rows: int
    cols: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must have at least one row and one column")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid extents must be strictly increasing")

    @property
    def cell_x(self) -> float:
        return (self.x_max - self.x_min) / self.rows

    @property
    def cell_y(self) -> float:
        return (self.y_max - self.y_min) / self.cols

    def frac_index(self, points: np.ndarray) -> np.ndarray:
        """Continuous (row, col) coordinates for xy points, shape (..., 2)."""
        points = np.asarray(points, dtype=np.float64)
        out = np.empty_like(points)
        out[..., 0] = (points[..., 0] - self.x_min) / self.cell_x
        out[..., 1] = (points[..., 1] - self.y_min) / self.cell_y
        return out

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (
            self.x_min + (row + 0.5) * self.cell_x,
            self.y_min + (col + 0.5) * self.cell_y,
        )

    def centers(self) -> np.ndarray:
        """Cell-center xy coordinates, shape (rows, cols, 2)."""
        xs = self.x_min + (np.arange(self.rows) + 0.5) * self.cell_x
        ys = self.y_min + (np.arange(self.cols) + 0.5) * self.cell_y
        out = np.empty((self.rows, self.cols, 2), dtype=np.float64)
        out[..., 0] = xs[:, None]
        out[..., 1] = ys[None, :]
        return out


class CellIndex(NamedTuple):
    row: int
    col: int


def world_to_grid(p: np.ndarray, spec: GridSpec) -> CellIndex | None:
    """Bin an ego-frame xy point to its grid cell.

    Returns None for points outside [x_min, x_max) x [y_min, y_max);
    the caller chooses whether to clamp or drop.
    """
    fr, fc = spec.frac_index(np.asarray(p, dtype=np.float64))
    row = math.floor(fr)
    col = math.floor(fc)
    if 0 <= row < spec.rows and 0 <= col < spec.cols:
        return CellIndex(row, col)
    return None


@dataclass(frozen=True)
class FeatureMap:
    """Dense C x H x W feature grid bound to a GridSpec.  Immutable."""

    values: np.ndarray
    spec: GridSpec

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise ValueError("feature values must be (channels, rows, cols)")
        if values.shape[1] != self.spec.rows or values.shape[2] != self.spec.cols:
            raise ValueError("feature grid does not match spec dimensions")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def channels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Pose2D:
    """SE(2) pose; also acts as the local-to-parent transform."""

    x: float
    y: float
    yaw: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s], [s, c]], dtype=np.float64)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map local xy points (..., 2) into the parent frame."""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation().T + np.array([self.x, self.y])

    def inverse(self) -> "Pose2D":
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2D(-(c * self.x + s * self.y), -(-s * self.x + c * self.y), -self.yaw)

    def compose(self, other: "Pose2D") -> "Pose2D":
        """Transform composition: (self o other) maps other's local frame."""
        t = self.transform(np.array([other.x, other.y]))
        return Pose2D(float(t[0]), float(t[1]), self.yaw + other.yaw)


@dataclass(frozen=True)
class Box7D:
    """Oriented 3D box: center, extents, heading about +z."""

    x: float
    y: float
    z: float
    l: float
    w: float
    h: float
    theta: float

    def __post_init__(self) -> None:
        if not (self.l > 0 and self.w > 0 and self.h > 0):
            raise ValueError("box extents must be positive")
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))


@dataclass(frozen=True)
class AabbBEV:
    """Axis-aligned BEV box, corners (x1, y1) bottom-left, (x2, y2) top-right."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise ValueError("degenerate axis-aligned box")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


def _cross_z(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


@dataclass(frozen=True)
class QuadBEV:
    """Convex BEV footprint, four corners counter-clockwise."""

    corners: np.ndarray

    def __post_init__(self) -> None:
        corners = np.ascontiguousarray(self.corners, dtype=np.float64)
        if corners.shape != (4, 2):
            raise ValueError("quad needs exactly four xy corners")
        edges = np.roll(corners, -1, axis=0) - corners
        cross = _cross_z(edges, np.roll(edges, -1, axis=0))
        area = 0.5 * _cross_z(corners, np.roll(corners, -1, axis=0)).sum()
        if area <= 0.0:
            raise ValueError("quad corners must be counter-clockwise with positive area")
        if np.any(cross < 0.0):
            raise ValueError("quad must be convex")
        corners.flags.writeable = False
        object.__setattr__(self, "corners", corners)

    @property
    def area(self) -> float:
        return float(0.5 * _cross_z(self.corners, np.roll(self.corners, -1, axis=0)).sum())


# footprint corner order: counter-clockwise from rear-left
_FOOTPRINT_SIGNS = np.array(
    [[-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0]], dtype=np.float64
)


def footprint_corners(b: Box7D) -> np.ndarray:
    """Rotated xy footprint corners (4, 2) in the box's own frame."""
    half = np.array([b.l / 2.0, b.w / 2.0])
    local = _FOOTPRINT_SIGNS * half
    return Pose2D(b.x, b.y, b.theta).transform(local)


def box7d_corners(b: Box7D) -> np.ndarray:
    """All eight cuboid corners, shape (8, 3).

    Bottom face (z - h/2) first, counter-clockwise from rear-left,
    then the top face in the same xy order.
    """
    xy = footprint_corners(b)
    out = np.empty((8, 3), dtype=np.float64)
    out[:4, :2] = xy
    out[4:, :2] = xy
    out[:4, 2] = b.z - b.h / 2.0
    out[4:, 2] = b.z + b.h / 2.0
    return out


def box7d_to_bev(b: Box7D, to_ego: Pose2D) -> tuple[QuadBEV, AabbBEV]:
    """Project a box footprint into the ego frame.

    ``to_ego`` maps the box's coordinate frame into the ego frame.
    Returns the rotated footprint and its axis-aligned envelope.
    """
    corners = to_ego.transform(footprint_corners(b))
    quad = QuadBEV(corners)
    lo = corners.min(axis=0)
    hi = corners.max(axis=0)
    return quad, AabbBEV(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def iou_aabb(a: AabbBEV, b: AabbBEV) -> float:
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def iou_rotated(a: QuadBEV, b: QuadBEV) -> float:
    """Exact IoU of two convex quads (polygon clipping + shoelace area)."""
    return float(_kernels.quad_iou(a.corners, b.corners))
