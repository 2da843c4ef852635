"""Point-to-point ICP refinement of a pose against occupied map cells.

The scan's valid downsampled beam endpoints (sensor frame) are registered to
the occupied cell centers of the map.  Each iteration matches endpoints to
their nearest map points within a cutoff and solves the closed-form 2-D
rigid alignment (SVD of the 2x2 cross-covariance).  Refinement fails softly:
too few correspondences or no convergence returns the initial pose with
``converged = False`` so callers can keep the unrefined hypothesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Pose, wrap_angle
from .grid_map import OCCUPIED, OccupancyGrid
from .scan import DownsampledScan


@dataclass
class IcpParams:
    max_iterations: int = 20
    correspondence_cutoff: float = 1.0  # meters
    convergence_eps: float = 1e-4  # |dt| + |dtheta| between iterations
    min_correspondences: int = 10

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.correspondence_cutoff <= 0 or self.convergence_eps <= 0:
            raise ValueError("cutoff and convergence_eps must be positive")
        if self.min_correspondences < 1:
            raise ValueError("min_correspondences must be >= 1")


@dataclass
class RefinedPose:
    pose: Pose
    converged: bool
    mean_residual: float
    iterations_used: int
    residual_history: list[float] = field(default_factory=list)


def map_occupied_points(grid: OccupancyGrid) -> np.ndarray:
    """World centers of all Occupied cells; error when there are none."""
    iy, ix = np.nonzero(grid.cells == OCCUPIED)
    if len(ix) == 0:
        raise ValueError("map has no occupied cells to register against")
    return grid.cell_center(ix, iy)


def _solve_rigid(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares R, t with det(R) = +1 mapping src onto dst."""
    src_c = src.mean(axis=0)
    dst_c = dst.mean(axis=0)
    h = (src - src_c).T @ (dst - dst_c)
    u, _s, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, d]) @ u.T
    t = dst_c - r @ src_c
    return r, t


def icp_refine(
    scan_d: DownsampledScan,
    initial: Pose,
    map_points: np.ndarray,
    params: IcpParams,
    tree: cKDTree | None = None,
) -> RefinedPose:
    """Refine ``initial`` so the scan endpoints land on occupied cells.

    ``tree`` may be a prebuilt cKDTree over ``map_points`` (callers that
    refine many hypotheses against one map should share it).
    """
    valid = scan_d.valid_mask
    if not valid.any():
        raise ValueError("scan has no valid beams")
    phi = scan_d.beam_angles[valid]
    z = scan_d.ranges[valid]
    local = np.stack([z * np.cos(phi), z * np.sin(phi)], axis=1)
    if tree is None:
        tree = cKDTree(np.asarray(map_points, dtype=float))

    cutoff = params.correspondence_cutoff

    def saturated_rms(dist: np.ndarray) -> float:
        # RMS over ALL beams with unmatched distances capped at the cutoff.
        # The closed-form solve minimizes the matched sum of squares and
        # re-matching never increases a capped distance, so this sequence is
        # non-increasing; a mean over the (changing) matched subset is not.
        return float(np.sqrt(np.mean(np.minimum(dist, cutoff) ** 2)))

    pose = initial
    history: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        world = pose.transform_points(local)
        dist, idx = tree.query(world, distance_upper_bound=cutoff)
        matched = np.isfinite(dist)
        history.append(saturated_rms(np.where(matched, dist, cutoff)))
        if matched.sum() < params.min_correspondences:
            return RefinedPose(
                pose=initial,
                converged=False,
                mean_residual=history[0],
                iterations_used=iterations,
                residual_history=history,
            )
        src = local[matched]
        dst = tree.data[idx[matched]]
        r, t = _solve_rigid(src, dst)
        new_theta = math.atan2(r[1, 0], r[0, 0])
        new_pose = Pose(t[0], t[1], new_theta)

        delta = (
            math.hypot(new_pose.x - pose.x, new_pose.y - pose.y)
            + abs(wrap_angle(new_pose.theta - pose.theta))
        )
        pose = new_pose
        if delta < params.convergence_eps:
            converged = True
            break

    world = pose.transform_points(local)
    dist, _ = tree.query(world, distance_upper_bound=cutoff)
    history.append(saturated_rms(np.where(np.isfinite(dist), dist, cutoff)))
    return RefinedPose(
        pose=pose,
        converged=converged,
        mean_residual=history[-1],
        iterations_used=iterations,
        residual_history=history,
    )
