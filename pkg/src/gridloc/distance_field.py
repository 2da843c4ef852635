"""Exact Euclidean distance-to-obstacle lookups at cell granularity.

The field stores, for every cell, the metric distance from its center to the
center of the nearest blocked cell (Occupied, plus Unknown when
``unknown_as_occupied``).  Queries are resolved at cell granularity: a world
point gets its containing cell's value.  Out-of-bounds points report distance
0 so that anything off the map counts as in collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid_map import OccupancyGrid


@dataclass
class DistanceField:
    """Per-cell obstacle clearance, aligned with the source grid."""

    distances: np.ndarray  # (height, width), meters; +inf when no obstacle exists
    resolution: float
    origin: np.ndarray
    has_obstacles: bool

    @property
    def height(self) -> int:
        return self.distances.shape[0]

    @property
    def width(self) -> int:
        return self.distances.shape[1]

    def query(self, points) -> np.ndarray:
        """Vectorized clearance lookup; out-of-bounds points report 0."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.floor((pts - self.origin) / self.resolution).astype(np.int64)
        ix, iy = idx[:, 0], idx[:, 1]
        inb = (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)
        out = np.zeros(len(pts))
        out[inb] = self.distances[iy[inb], ix[inb]]
        return out


def build_distance_field(grid: OccupancyGrid, unknown_as_occupied: bool = True) -> DistanceField:
    """Exact EDT of the blocked-cell set, scaled to meters."""
    blocked = grid.blocking(unknown_as_occupied)
    if not blocked.any():
        distances = np.full(blocked.shape, np.inf)
        has_obstacles = False
    else:
        distances = ndimage.distance_transform_edt(
            ~blocked, sampling=grid.resolution
        )
        has_obstacles = True
    return DistanceField(
        distances=distances,
        resolution=grid.resolution,
        origin=grid.origin.copy(),
        has_obstacles=has_obstacles,
    )


def min_dist_to_obstacle(field: DistanceField, point) -> float:
    """Clearance at a single world point (0 when out of bounds)."""
    return float(field.query(np.asarray(point, dtype=float).reshape(1, 2))[0])


def traversability_check(field: DistanceField, p0, p1, r_robot: float) -> bool:
    """True iff every sample along segment p0->p1 clears r_robot.

    Samples are spaced at most resolution/2 apart and include both endpoints;
    the sample set is symmetric in the endpoints, so the check commutes.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.linalg.norm(p1 - p0))
    n = max(1, math.ceil(length / (field.resolution / 2.0)))
    ts = np.linspace(0.0, 1.0, n + 1)
    pts = p0[None, :] + ts[:, None] * (p1 - p0)[None, :]
    return bool(np.all(field.query(pts) >= r_robot))
