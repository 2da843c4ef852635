"""Synthetic worlds and a LiDAR simulator for closed-loop trials.

Map generators are deterministic in their parameters and seed, produce a
connected free region containing the world origin (except ``split_rooms``,
which deliberately has two components), and keep a clearance disk around
(0, 0) so the sampler start stays feasible.  Perturbations model small
environment changes between mapping time and query time; they return new
grids and never touch the perimeter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose
from .grid_map import FREE, OCCUPIED, OccupancyGrid
from .raycast import cast_rays
from .scan import INVALID_RANGE, LidarScan

MAP_KINDS = ("empty_room", "cluttered_office", "corridor_loop", "split_rooms")
PERTURB_KINDS = ("open_door", "add_clutter", "remove_wall_segment")

_ORIGIN = np.array([-1.5, -1.5])
_START_CLEAR_RADIUS = 0.9  # keep this disk around world (0,0) free


@dataclass
class LidarModel:
    """Sensor parameters for the simulator (angles in radians)."""

    fov: float = math.radians(220.0)
    angle_increment: float = math.radians(1.0)
    range_max: float = 20.0
    noise_sigma: float = 0.0
    dropout: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.fov <= 2.0 * math.pi + 1e-12:
            raise ValueError("fov must lie in (0, 2*pi]")
        if self.angle_increment <= 0 or self.range_max <= 0:
            raise ValueError("angle_increment and range_max must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError("dropout must lie in [0, 1]")

    @property
    def n_beams(self) -> int:
        return max(1, round(self.fov / self.angle_increment))

    def to_dict(self) -> dict:
        return {
            "fov": self.fov,
            "angle_increment": self.angle_increment,
            "range_max": self.range_max,
            "noise_sigma": self.noise_sigma,
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LidarModel":
        known = {"fov", "angle_increment", "range_max", "noise_sigma", "dropout"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown lidar keys: {sorted(unknown)}")
        return cls(**data)


def _cell_count(extent_m: float, resolution: float) -> int:
    n = round(extent_m / resolution)
    if n < 8:
        raise ValueError(f"map extent {extent_m} too small for resolution {resolution}")
    return n


def _box(occ: np.ndarray, origin, res: float, x0: float, y0: float, x1: float, y1: float,
         value: bool = True) -> None:
    """Fill the world-frame rectangle [x0,x1) x [y0,y1) in the occupancy mask."""
    h, w = occ.shape
    cx0 = max(0, int(math.floor((x0 - origin[0]) / res)))
    cy0 = max(0, int(math.floor((y0 - origin[1]) / res)))
    cx1 = min(w, int(math.ceil((x1 - origin[0]) / res)))
    cy1 = min(h, int(math.ceil((y1 - origin[1]) / res)))
    if cx1 > cx0 and cy1 > cy0:
        occ[cy0:cy1, cx0:cx1] = value


def _disk(occ: np.ndarray, origin, res: float, cx: float, cy: float, r: float) -> None:
    h, w = occ.shape
    xs = origin[0] + (np.arange(w) + 0.5) * res
    ys = origin[1] + (np.arange(h) + 0.5) * res
    dist2 = (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2
    occ[dist2 <= r * r] = True


def _finish(occ: np.ndarray, resolution: float, name: str) -> OccupancyGrid:
    cells = np.where(occ, OCCUPIED, FREE).astype(np.int8)
    return OccupancyGrid(cells=cells, resolution=resolution,
                         origin=_ORIGIN.copy(), name=name)


def _ring(occ: np.ndarray) -> None:
    occ[0, :] = True
    occ[-1, :] = True
    occ[:, 0] = True
    occ[:, -1] = True


def generate_map(
    kind: str,
    size: tuple[float, float],
    resolution: float,
    seed: int = 0,
    min_obstacles: int = 10,
) -> OccupancyGrid:
    """Build one of the synthetic scenario maps; see MAP_KINDS."""
    if kind not in MAP_KINDS:
        raise ValueError(f"unknown map kind {kind!r}; expected one of {MAP_KINDS}")
    w_m, h_m = float(size[0]), float(size[1])
    w = _cell_count(w_m, resolution)
    h = _cell_count(h_m, resolution)
    occ = np.zeros((h, w), dtype=bool)
    _ring(occ)
    ox, oy = _ORIGIN
    x1, y1 = ox + w * resolution, oy + h * resolution

    if kind == "empty_room":
        # One off-center wall stub; a perfectly empty rectangle aliases its
        # own 180-degree rotation, which no scan could disambiguate.  The
        # stub is a solid box, not a thin fin, so it subtends at least one
        # beam of a coarsely downsampled scan from anywhere in the room.
        stub_y = oy + 0.30 * h_m
        stub_len = min(1.2, w_m / 4.0)
        stub_wid = min(0.8, h_m / 4.0)
        _box(occ, _ORIGIN, resolution, x1 - stub_len, stub_y,
             x1, stub_y + stub_wid)

    elif kind == "split_rooms":
        # Snap to one cell column so the divider is a thin wall a door can
        # be carved through.
        wall_col = min(w - 2, int(round(0.55 * w_m / resolution)))
        occ[:, wall_col] = True

    elif kind == "corridor_loop":
        # Ring corridor with asymmetric widths plus a notch and a fin for
        # orientation features.
        bx0, bx1 = ox + 2.0, x1 - 3.0
        by0, by1 = oy + 2.2, y1 - 2.8
        if bx1 - bx0 < 1.0 or by1 - by0 < 1.0:
            raise ValueError("corridor_loop needs a map at least ~8 x 7 m")
        _box(occ, _ORIGIN, resolution, bx0, by0, bx1, by1)
        notch_y = by0 + 0.55 * (by1 - by0)
        _box(occ, _ORIGIN, resolution, bx0, notch_y, bx0 + 0.8,
             notch_y + 0.8, value=False)
        fin_x = bx0 + 0.3 * (bx1 - bx0)
        _box(occ, _ORIGIN, resolution, fin_x, by1, fin_x + resolution,
             min(by1 + 0.9, y1 - 0.6))

    elif kind == "cluttered_office":
        placed = _build_office(occ, resolution, ox, oy, x1, y1,
                               w_m, h_m, seed, min_obstacles)
        if placed < min_obstacles:
            raise ValueError(
                f"map {w_m} x {h_m} has room for only {placed} obstacles, "
                f"need {min_obstacles}"
            )

    return _finish(occ, resolution, f"{kind}_{seed}")


def _build_office(occ, resolution, ox, oy, x1, y1, w_m, h_m,
                  seed, min_obstacles) -> int:
    """Cluttered office: partitions, wall relief, corner features, clutter.

    Clutter is placed by greedy Poisson-disk rejection with obstacle-hull
    gaps of at least ~0.9 m, so the free region stays connected and wide
    enough for the robot.  Random placement with mixed shapes keeps local
    obstacle constellations distinctive; regular lattices alias themselves
    under lattice translations and quarter-turn rotations.  The perimeter
    gets an irregular pilaster profile per wall for the same reason: a
    featureless wall seen up close matches every other wall under some
    rotation or slide, and near-wall poses would alias across the room.
    """
    # Full partition with a (closed) doorway target for perturbations, a
    # partial counter-partition from the north wall, and a third from the
    # east wall.  The third caps sight lines on the east side: alignment
    # scores lose discrimination when most beams run long, so no area should
    # see much further than the partition spacing.  Exact fractions vary by
    # seed so the maps differ architecturally, not just in clutter.
    arng = np.random.default_rng([seed, 37])
    part_x = ox + arng.uniform(0.22, 0.28) * w_m
    part_top = oy + arng.uniform(0.60, 0.70) * h_m
    _box(occ, _ORIGIN, resolution, part_x, oy, part_x + resolution, part_top)
    part2_x = ox + arng.uniform(0.58, 0.66) * w_m
    _box(occ, _ORIGIN, resolution, part2_x, y1 - arng.uniform(0.25, 0.35) * h_m,
         part2_x + resolution, y1)
    part3_y = oy + arng.uniform(0.42, 0.48) * h_m
    part3_x0 = x1 - arng.uniform(0.34, 0.42) * w_m
    _box(occ, _ORIGIN, resolution, part3_x0, part3_y, x1, part3_y + resolution)

    # One distinct feature per corner (southwest stays clear: the start
    # region plus the nearby partition is its signature).
    _triangle_ne(occ, _ORIGIN, resolution, x1, y1, depth=1.2)
    _box(occ, _ORIGIN, resolution, ox + 1.5, y1 - 0.6, ox + 3.3, y1)
    _disk(occ, _ORIGIN, resolution, x1 - 1.0, oy + 1.0, 0.5)
    corner_zones = [
        (x1 - 1.4, y1 - 1.4, x1, y1),
        (ox + 1.5, y1 - 0.6, ox + 3.3, y1),
        (x1 - 1.5, oy, x1, oy + 1.5),
    ]

    fixtures = _wall_relief(occ, resolution, ox, oy, x1, y1, seed,
                            part_x, part2_x, part3_y)
    fixtures += _partition_fins(occ, resolution, oy, y1, h_m, seed,
                                part_x, part_top, part2_x)

    placed = 0
    gaps = (1.5, 1.1, 0.8, 0.6, 0.5)
    for attempt, gap in enumerate(gaps):
        trial_occ = occ.copy()
        crng = np.random.default_rng([seed, 17, attempt])
        # Wall fixtures join the exclusion set but don't count as clutter.
        kept: list[tuple[float, float, float]] = list(fixtures)
        margin = 1.0
        # Two long oblique landmark walls go first, while space is easy to
        # find; their surface angles are unique in the room.  If they can't
        # be placed early, ordinary clutter takes over; cramped retries skip
        # them entirely.
        landmarks_left = 2 if attempt < 2 else 0
        for it in range(600):
            if landmarks_left > 0 and it < 120:
                hl = crng.uniform(1.4, 2.4)
                shape = ("thin", hl, crng.uniform(math.radians(20),
                                                  math.radians(70))
                         + (math.pi / 2.0) * crng.integers(2))
                r = hl
                kind_u = -1.0
            else:
                kind_u = crng.random()
            cx = crng.uniform(ox + margin, x1 - margin)
            cy = crng.uniform(oy + margin, y1 - margin)
            # Wide size bands and free rotation: clutter at one common scale
            # and axis-aligned everywhere reads the same from every pocket,
            # which is exactly the self-similarity the trials must not have.
            if kind_u >= 0.0:
                angle = crng.uniform(0.0, math.pi)
                if kind_u < 0.35:
                    hw, hh = crng.uniform(0.25, 0.9, 2)
                    shape = ("box", hw, hh, angle)
                    r = math.hypot(hw, hh)
                elif kind_u < 0.45:
                    rad = crng.uniform(0.2, 0.5)
                    shape = ("disk", rad)
                    r = rad
                elif kind_u < 0.65:
                    hl = crng.uniform(0.4, 1.1)
                    shape = ("thin", hl, angle)
                    r = hl
                else:
                    arm_a = crng.uniform(0.8, 1.8)
                    arm_b = crng.uniform(0.8, 1.8)
                    shape = ("ell", arm_a, arm_b, angle)
                    r = max(arm_a, arm_b) + 0.2
            if cx - r < ox + margin or cx + r > x1 - margin:
                continue
            if cy - r < oy + margin or cy + r > y1 - margin:
                continue
            if math.hypot(cx, cy) < _START_CLEAR_RADIUS + r + 0.3:
                continue  # keep the start disk clear
            if abs(cx - part_x) < r + gap or abs(cx - part2_x) < r + gap:
                continue  # keep corridors along the partitions
            if abs(cy - part3_y) < r + gap and cx > part3_x0 - r - gap:
                continue
            if any(zx0 - r - gap < cx < zx1 + r + gap
                   and zy0 - r - gap < cy < zy1 + r + gap
                   for zx0, zy0, zx1, zy1 in corner_zones):
                continue  # keep corner signatures unobstructed
            if any(math.hypot(cx - px, cy - py) < r + pr + gap
                   for px, py, pr in kept):
                continue
            kept.append((cx, cy, r))
            _place(trial_occ, resolution, cx, cy, shape)
            if kind_u < 0.0:
                landmarks_left -= 1
        if len(kept) - len(fixtures) >= min_obstacles or attempt == len(gaps) - 1:
            occ[:, :] = trial_occ
            placed = len(kept) - len(fixtures)
            break
    return placed


def _wall_relief(occ, resolution, ox, oy, x1, y1, seed,
                 part_x, part2_x, part3_y) -> list[tuple[float, float, float]]:
    """Pilasters at irregular stations along each wall; returns their hulls.

    Stations are stratified-jittered, so every wall carries a distinct,
    aperiodic protrusion profile; sizes vary per station.  Stations keep
    clear of corners, partition junctions and the start disk.
    """
    wrng = np.random.default_rng([seed, 29])
    corner_margin = 2.2
    hulls: list[tuple[float, float, float]] = []
    walls = [
        ("s", ox, x1, [(part_x - 1.2, part_x + 1.2)], True),
        ("n", ox, x1, [(ox, ox + 3.6), (part2_x - 1.2, part2_x + 1.2)], True),
        ("w", oy, y1, [], False),
        ("e", oy, y1, [(part3_y - 1.2, part3_y + 1.2)], False),
    ]
    for name, a0, a1, forbidden, horiz in walls:
        lo, hi = a0 + corner_margin, a1 - corner_margin
        count = int(wrng.integers(3, 6))
        jitter = wrng.random(count)
        widths = wrng.uniform(0.5, 1.5, count)
        depths = wrng.uniform(0.35, 0.6, count)
        if hi - lo < 1.0:
            continue
        for i in range(count):
            c = lo + (hi - lo) * (i + 0.25 + 0.5 * jitter[i]) / count
            half_w, depth = widths[i] / 2.0, depths[i]
            if any(f0 - half_w < c < f1 + half_w for f0, f1 in forbidden):
                continue
            if horiz:
                py = (oy, oy + depth) if name == "s" else (y1 - depth, y1)
                rect = (c - half_w, py[0], c + half_w, py[1])
            else:
                px = (ox, ox + depth) if name == "w" else (x1 - depth, x1)
                rect = (px[0], c - half_w, px[1], c + half_w)
            cx, cy = (rect[0] + rect[2]) / 2.0, (rect[1] + rect[3]) / 2.0
            r = math.hypot(half_w, depth / 2.0)
            if math.hypot(cx, cy) < _START_CLEAR_RADIUS + r + 0.4:
                continue
            _box(occ, _ORIGIN, resolution, *rect)
            hulls.append((cx, cy, r))
    return hulls


def _partition_fins(occ, resolution, oy, y1, h_m, seed, part_x, part_top,
                    part2_x) -> list[tuple[float, float, float]]:
    """Short spurs off the partitions; breaks slides along the hallways."""
    frng = np.random.default_rng([seed, 31])
    hulls: list[tuple[float, float, float]] = []
    spans = [
        (part_x, oy + 0.15 * h_m, part_top - 1.0, -1.0),
        (part_x, oy + 0.15 * h_m, part_top - 1.0, +1.0),
        (part2_x, y1 - 0.28 * h_m + 0.5, y1 - 1.0, -1.0),
    ]
    for px, y_lo, y_hi, side in spans:
        if y_hi - y_lo < 0.5:
            continue
        fy = frng.uniform(y_lo, y_hi)
        length = frng.uniform(0.6, 1.0)
        x0, x1f = (px - length, px) if side < 0 else (px, px + length)
        _box(occ, _ORIGIN, resolution, x0, fy, x1f, fy + 0.15)
        hulls.append(((x0 + x1f) / 2.0, fy + 0.075,
                      math.hypot(length / 2.0, 0.075)))
    return hulls


def _triangle_ne(occ, origin, res, x1, y1, depth) -> None:
    """Fill the 45-degree chamfer triangle at the map's northeast corner."""
    h, w = occ.shape
    xs = origin[0] + (np.arange(w) + 0.5) * res
    ys = origin[1] + (np.arange(h) + 0.5) * res
    occ[(xs[None, :] + ys[:, None]) >= (x1 + y1 - depth)] = True


def _rot_rect(occ: np.ndarray, resolution: float, cx: float, cy: float,
              hw: float, hh: float, angle: float) -> None:
    """Fill cells whose centers fall inside a rotated axis-extents rect."""
    reach = math.hypot(hw, hh)
    h, w = occ.shape
    ix0 = max(0, int((cx - reach - _ORIGIN[0]) / resolution) - 1)
    ix1 = min(w, int((cx + reach - _ORIGIN[0]) / resolution) + 2)
    iy0 = max(0, int((cy - reach - _ORIGIN[1]) / resolution) - 1)
    iy1 = min(h, int((cy + reach - _ORIGIN[1]) / resolution) + 2)
    if ix0 >= ix1 or iy0 >= iy1:
        return
    xs = _ORIGIN[0] + (np.arange(ix0, ix1) + 0.5) * resolution - cx
    ys = _ORIGIN[1] + (np.arange(iy0, iy1) + 0.5) * resolution - cy
    ca, sa = math.cos(angle), math.sin(angle)
    u = ca * xs[None, :] + sa * ys[:, None]
    v = -sa * xs[None, :] + ca * ys[:, None]
    occ[iy0:iy1, ix0:ix1] |= (np.abs(u) <= hw) & (np.abs(v) <= hh)


def _place(occ: np.ndarray, resolution: float, cx: float, cy: float, shape) -> None:
    kind = shape[0]
    if kind == "disk":
        _disk(occ, _ORIGIN, resolution, cx, cy, shape[1])
    elif kind == "box":
        _, hw, hh, angle = shape
        _rot_rect(occ, resolution, cx, cy, hw, hh, angle)
    elif kind == "thin":
        _, hl, angle = shape
        _rot_rect(occ, resolution, cx, cy, hl, 0.08, angle)
    else:  # "ell": two 0.4 m-thick arms joined at the center
        _, arm_a, arm_b, angle = shape
        ca, sa = math.cos(angle), math.sin(angle)
        ax, ay = cx + 0.5 * arm_a * ca, cy + 0.5 * arm_a * sa
        _rot_rect(occ, resolution, ax, ay, arm_a / 2.0, 0.2, angle)
        bx, by = cx - 0.5 * arm_b * sa, cy + 0.5 * arm_b * ca
        _rot_rect(occ, resolution, bx, by, 0.2, arm_b / 2.0, angle)


def _thin_wall_candidates(grid: OccupancyGrid) -> list[tuple[int, int, str]]:
    """Occupied cells with free cells on both lateral sides (1-cell walls)."""
    cells = grid.cells
    occ = cells == OCCUPIED
    free = cells == FREE
    out = []
    h, w = cells.shape
    iy, ix = np.nonzero(occ[1:-1, 1:-1])
    for y, x in zip(iy + 1, ix + 1):
        if free[y, x - 1] and free[y, x + 1]:
            out.append((x, y, "vertical"))
        elif free[y - 1, x] and free[y + 1, x]:
            out.append((x, y, "horizontal"))
    return out


def perturb_map(
    grid: OccupancyGrid,
    kind: str,
    seed: int = 0,
    max_area_m2: float = 1.5,
) -> OccupancyGrid:
    """Return an edited copy of the map; see PERTURB_KINDS."""
    if kind not in PERTURB_KINDS:
        raise ValueError(f"unknown perturbation {kind!r}; expected one of {PERTURB_KINDS}")
    rng = np.random.default_rng(seed)
    cells = grid.cells.copy()
    res = grid.resolution
    budget_cells = max(1, int(max_area_m2 / res**2))

    if kind in ("open_door", "remove_wall_segment"):
        span_m = 1.0 if kind == "open_door" else 1.5
        span_cells = max(2, int(round(span_m / res)))
        occ = cells == OCCUPIED

        def _run(x: int, y: int, orient: str) -> tuple[int, int]:
            # Occupied extent [lo, hi) along the wall through (x, y),
            # clipped to the grid interior.
            if orient == "vertical":
                line, i, n = occ[:, x], y, grid.height
            else:
                line, i, n = occ[y, :], x, grid.width
            lo = i
            while lo - 1 > 0 and line[lo - 1]:
                lo -= 1
            hi = i + 1
            while hi < n - 1 and line[hi]:
                hi += 1
            return lo, hi

        # Keep candidates whose wall run can absorb the whole span, so the
        # carved opening really is span_m of previously occupied cells.
        candidates = []
        for x, y, orient in _thin_wall_candidates(grid):
            lo, hi = _run(x, y, orient)
            if hi - lo >= span_cells:
                candidates.append((x, y, orient, lo, hi))
        if not candidates:
            raise ValueError("map has no thin wall to open")
        x, y, orient, lo, hi = candidates[int(rng.integers(len(candidates)))]
        # Center the span on the candidate, then slide it inside the run.
        start = (y if orient == "vertical" else x) - span_cells // 2
        start = min(max(start, lo), hi - span_cells)
        carve = min(span_cells, budget_cells)
        if orient == "vertical":
            cells[start:start + carve, x] = FREE
        else:
            cells[y, start:start + carve] = FREE

    else:  # add_clutter
        free = cells == FREE
        # Clearance in cells to the nearest non-free cell, so new clutter
        # lands in open space and stays off the start disk.
        from scipy import ndimage

        clear = ndimage.distance_transform_edt(free)
        ys, xs = np.nonzero(clear * res >= 0.6)
        centers = grid.cell_center(xs, ys)
        far_from_start = np.hypot(centers[:, 0], centers[:, 1]) > _START_CLEAR_RADIUS + 0.6
        xs, ys = xs[far_from_start], ys[far_from_start]
        if len(xs) == 0:
            raise ValueError("map has no open space for clutter")
        n_boxes = int(rng.integers(1, 4))
        added = 0
        for _ in range(n_boxes):
            i = int(rng.integers(len(xs)))
            half = int(round(rng.uniform(0.1, 0.25) / res))
            x0, x1 = max(1, xs[i] - half), min(grid.width - 1, xs[i] + half + 1)
            y0, y1 = max(1, ys[i] - half), min(grid.height - 1, ys[i] + half + 1)
            patch = cells[y0:y1, x0:x1]
            room = budget_cells - added
            if patch.size > room:
                continue
            added += int(np.sum(patch == FREE))
            patch[:] = OCCUPIED

    out = OccupancyGrid(
        cells=cells,
        resolution=res,
        origin=grid.origin.copy(),
        occupied_thresh=grid.occupied_thresh,
        free_thresh=grid.free_thresh,
        name=f"{grid.name}+{kind}",
    )
    return out


def simulate_scan(
    grid: OccupancyGrid,
    pose: Pose,
    model: LidarModel,
    seed: int = 0,
) -> LidarScan:
    """Cast the sensor's beams from a pose, add noise, apply dropout.

    Beams that reach ``range_max`` without an echo are invalid returns, the
    same sentinel as dropout; only synthesized panoramic scans clamp them.
    Noiseless simulation where every beam echoes reproduces
    synthesize_panoramic_scan beam for beam (same ray caster).
    """
    ix, iy = grid.world_to_cell((pose.x, pose.y))
    if not grid.cell_in_bounds(ix, iy) or grid.blocking()[iy, ix]:
        raise ValueError(f"scan pose {pose} is not in free space")
    n = model.n_beams
    angle_min = -model.fov / 2.0
    local = angle_min + np.arange(n) * model.angle_increment
    ranges = cast_rays(grid, (pose.x, pose.y), pose.theta + local, model.range_max)
    ranges = np.where(ranges < model.range_max, ranges, INVALID_RANGE)
    rng = np.random.default_rng(seed)
    if model.noise_sigma > 0:
        ranges = ranges + rng.normal(0.0, model.noise_sigma, n)
        ranges = np.clip(ranges, 1e-3, model.range_max)
    if model.dropout > 0:
        drop = rng.random(n) < model.dropout
        ranges = np.where(drop, INVALID_RANGE, ranges)
    return LidarScan(
        angle_min=angle_min,
        angle_increment=model.angle_increment,
        range_max=model.range_max,
        ranges=ranges,
    )


def draw_free_poses(
    grid: OccupancyGrid,
    n: int,
    seed: int,
    min_clearance: float = 0.3,
    component_of=(0.0, 0.0),
    border_margin: float = 1.0,
) -> list[Pose]:
    """Random poses in the free component containing ``component_of``.

    Poses keep ``min_clearance`` from every obstacle and ``border_margin``
    from the map edge; interior walls may be approached to the clearance.
    """
    from scipy import ndimage

    clear = ndimage.distance_transform_edt(grid.cells == FREE) * grid.resolution
    mask = clear >= min_clearance
    b = math.ceil(border_margin / grid.resolution)
    if b > 0:
        inner = np.zeros_like(mask)
        if mask.shape[0] > 2 * b and mask.shape[1] > 2 * b:
            inner[b:-b, b:-b] = True
        mask &= inner
    labels, _ = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    six, siy = grid.world_to_cell(np.asarray(component_of, dtype=float))
    home = labels[siy, six]
    if home == 0:
        raise ValueError("component seed point is not in clear free space")
    ys, xs = np.nonzero(labels == home)
    if len(xs) == 0:
        raise ValueError("no clear free cells to draw poses from")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(xs), n)
    poses = []
    for i in picks:
        center = grid.cell_center(int(xs[i]), int(ys[i]))
        jitter = rng.uniform(-0.4, 0.4, 2) * grid.resolution
        theta = rng.uniform(-math.pi, math.pi)
        poses.append(Pose(center[0] + jitter[0], center[1] + jitter[1], theta))
    return poses
