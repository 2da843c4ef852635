"""Sparse feasible-position sampling via a traversability-constrained RRT.

Starting from a known-feasible point, the tree grows in rounds.  Each round
makes ceil(W * H * r^2 / rho^2) expansion attempts (the map's area in cells
times the squared resolution, divided by the squared voxel spacing): draw a
uniform point in the map's bounding rectangle, extend the nearest tree node
toward it by an obstacle-adaptive step, and keep the new node only when the
connecting segment stays traversable for the robot radius.  After every
round the tree is voxel-downsampled at spacing rho; growth stops once a
round covers at most eps_gain new voxels (or at the round cap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distance_field import DistanceField, min_dist_to_obstacle, traversability_check
from .grid_map import OccupancyGrid, in_sampling_boundary


@dataclass
class SamplerConfig:
    rho: float = 1.0  # voxel spacing, meters
    eps_gain: int = 2  # stop when a round adds <= this many voxels
    eta_max: float = 0.6  # expansion step ceiling, meters
    r_robot: float = 0.21  # robot radius, meters
    rng_seed: int = 0
    max_rounds: int = 50

    def __post_init__(self):
        if self.rho <= 0 or self.eta_max <= 0 or self.r_robot <= 0:
            raise ValueError("rho, eta_max and r_robot must be positive")
        if self.eta_max < self.r_robot:
            raise ValueError("eta_max must be >= r_robot")


@dataclass
class RrtTree:
    """Flat arrays of node positions and parent indices (root parent -1)."""

    positions: np.ndarray  # (n, 2)
    parents: np.ndarray  # (n,)

    @property
    def n_nodes(self) -> int:
        return len(self.positions)


@dataclass
class PositionSet:
    """Voxel-sparse feasible hypotheses plus audit data from the growth run."""

    positions: np.ndarray  # (m, 2), one representative per covered voxel
    tree: RrtTree
    round_gains: list[int] = field(default_factory=list)
    rounds_run: int = 0
    terminated_by_gain: bool = False

    @property
    def n_positions(self) -> int:
        return len(self.positions)


def adaptive_expand_dist(field: DistanceField, point, r_robot: float, eta_max: float) -> float:
    """Expansion step that shrinks near obstacles.

    Full eta_max with clearance >= 2 r_robot, r_robot at clearance <= r_robot,
    linear in between.
    """
    d_obs = min_dist_to_obstacle(field, point)
    if d_obs >= 2.0 * r_robot:
        return eta_max
    if d_obs <= r_robot:
        return r_robot
    return r_robot + ((d_obs - r_robot) / r_robot) * (eta_max - r_robot)


def _voxel_keys(points: np.ndarray, rho: float, anchor) -> np.ndarray:
    anchor = np.asarray(anchor, dtype=float)
    return np.floor((points - anchor) / rho).astype(np.int64)


def voxel_downsample(points, rho: float, anchor=(0.0, 0.0)) -> np.ndarray:
    """Centroid of the points in each occupied rho x rho cell.

    Cells are axis-aligned and anchored at ``anchor``; output rows are sorted
    by cell index, so the result is order-independent in the input.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        return np.empty((0, 2))
    if rho <= 0:
        raise ValueError("rho must be positive")
    keys = _voxel_keys(pts, rho, anchor)
    order = np.lexsort((keys[:, 1], keys[:, 0]))
    keys_sorted = keys[order]
    pts_sorted = pts[order]
    boundaries = np.any(np.diff(keys_sorted, axis=0) != 0, axis=1)
    starts = np.concatenate([[0], np.nonzero(boundaries)[0] + 1])
    ends = np.concatenate([starts[1:], [len(pts_sorted)]])
    sums = np.add.reduceat(pts_sorted, starts, axis=0)
    counts = (ends - starts)[:, None]
    return sums / counts


def sample_hypotheses(
    grid: OccupancyGrid,
    field: DistanceField,
    p0,
    cfg: SamplerConfig,
) -> PositionSet:
    """Grow the constrained RRT from p0 and return voxel representatives.

    Every returned position clears r_robot: the voxel centroid is used when
    it does, otherwise the in-voxel tree node nearest the centroid (tree
    nodes are feasible by construction).
    """
    p0 = np.asarray(p0, dtype=float)
    if not in_sampling_boundary(grid, p0):
        raise ValueError(f"start point {p0} outside the sampling boundary")
    if min_dist_to_obstacle(field, p0) < cfg.r_robot:
        raise ValueError(f"start point {p0} violates the robot clearance")

    w_cells, h_cells = grid.width, grid.height
    n_attempts = math.ceil(w_cells * h_cells * grid.resolution**2 / cfg.rho**2)
    rng = np.random.default_rng(cfg.rng_seed)
    lo = grid.origin
    extent = np.array(grid.size_m)

    capacity = 1024
    nodes = np.empty((capacity, 2))
    parents = np.empty(capacity, dtype=np.int64)
    nodes[0] = p0
    parents[0] = -1
    n_nodes = 1

    covered: set[tuple[int, int]] = {
        tuple(_voxel_keys(p0[None, :], cfg.rho, grid.origin)[0])
    }
    round_gains: list[int] = []
    terminated_by_gain = False
    rounds_run = 0

    for _round in range(cfg.max_rounds):
        rounds_run += 1
        new_keys: set[tuple[int, int]] = set()
        for _ in range(n_attempts):
            p_rand = lo + rng.random(2) * extent
            diffs = nodes[:n_nodes] - p_rand
            nearest = int(np.argmin(np.einsum("ij,ij->i", diffs, diffs)))
            p_near = nodes[nearest]
            delta = p_rand - p_near
            dist = float(np.linalg.norm(delta))
            if dist == 0.0:
                continue
            eta = adaptive_expand_dist(field, p_near, cfg.r_robot, cfg.eta_max)
            p_new = p_near + delta * (min(eta, dist) / dist)
            if not in_sampling_boundary(grid, p_new):
                continue
            if not traversability_check(field, p_near, p_new, cfg.r_robot):
                continue
            if n_nodes == capacity:
                capacity *= 2
                nodes = np.resize(nodes, (capacity, 2))
                parents = np.resize(parents, capacity)
            nodes[n_nodes] = p_new
            parents[n_nodes] = nearest
            n_nodes += 1
            key = tuple(_voxel_keys(p_new[None, :], cfg.rho, grid.origin)[0])
            if key not in covered:
                covered.add(key)
                new_keys.add(key)
        round_gains.append(len(new_keys))
        if len(new_keys) <= cfg.eps_gain:
            terminated_by_gain = True
            break

    tree = RrtTree(positions=nodes[:n_nodes].copy(), parents=parents[:n_nodes].copy())
    positions = voxel_downsample(tree.positions, cfg.rho, anchor=grid.origin)

    # Centroids of concave clusters can fall inside obstacles; fall back to
    # the nearest in-voxel tree node, which is feasible by construction.
    clear = field.query(positions)
    if np.any(clear < cfg.r_robot):
        node_keys = _voxel_keys(tree.positions, cfg.rho, grid.origin)
        pos_keys = _voxel_keys(positions, cfg.rho, grid.origin)
        for i in np.nonzero(clear < cfg.r_robot)[0]:
            members = np.all(node_keys == pos_keys[i], axis=1)
            candidates = tree.positions[members]
            d = np.linalg.norm(candidates - positions[i], axis=1)
            positions[i] = candidates[int(np.argmin(d))]

    return PositionSet(
        positions=positions,
        tree=tree,
        round_gains=round_gains,
        rounds_run=rounds_run,
        terminated_by_gain=terminated_by_gain,
    )
