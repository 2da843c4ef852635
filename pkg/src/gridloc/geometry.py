"""Planar pose primitives and angle helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Wrap an angle (scalar or ndarray) into [-pi, pi)."""
    return (theta + math.pi) % TWO_PI - math.pi


def angle_diff(a: float, b: float) -> float:
    """Smallest signed difference a - b, wrapped."""
    return float(wrap_angle(a - b))


@dataclass(frozen=True)
class Pose:
    """A planar pose (x, y, theta); theta is wrapped into [-pi, pi) on construction."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", float(wrap_angle(float(self.theta))))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        """Map (N, 2) points from the pose frame into the world frame."""
        pts = np.asarray(pts, dtype=float)
        return pts @ self.rotation().T + self.position
