"""Tri-state occupancy grids and the descriptor/PGM map file format.

A map on disk is a YAML descriptor naming an 8-bit grayscale PGM raster plus
the usual keys: ``image``, ``resolution``, ``origin`` ([x, y, yaw]),
``occupied_thresh`` (default 0.65), ``free_thresh`` (default 0.196) and
``negate`` (0/1).  The raster is row-major with the top row at maximum y;
with ``negate: 0`` the occupancy probability of a pixel with value v is
(255 - v) / 255.  Cells classify as Occupied when the probability exceeds
``occupied_thresh``, Free when it is below ``free_thresh``, Unknown between.

In memory the grid is a (height, width) int8 array indexed ``cells[iy, ix]``
with row 0 at minimum y; the world origin key gives the position of the
lower-left corner of cell (0, 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

FREE = 0
OCCUPIED = 1
UNKNOWN = 2

# Pixel values used when rasterizing a grid back to PGM.
_PGM_VALUE = {FREE: 254, OCCUPIED: 0, UNKNOWN: 205}

DEFAULT_OCCUPIED_THRESH = 0.65
DEFAULT_FREE_THRESH = 0.196


class MapLoadError(Exception):
    """Raised when a map descriptor or raster cannot be parsed."""


@dataclass
class OccupancyGrid:
    """A metric occupancy grid: int8 cell states plus world-frame placement."""

    cells: np.ndarray
    resolution: float
    origin: np.ndarray  # world (x, y) of the lower-left corner of cell (0, 0)
    occupied_thresh: float = DEFAULT_OCCUPIED_THRESH
    free_thresh: float = DEFAULT_FREE_THRESH
    name: str = "map"

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int8)
        if self.cells.ndim != 2 or self.cells.size == 0:
            raise ValueError("grid cells must be a non-empty 2-D array")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.origin = np.asarray(self.origin, dtype=float).reshape(2)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def size_m(self) -> tuple[float, float]:
        """World extents (width, height) in meters."""
        return (self.width * self.resolution, self.height * self.resolution)

    @property
    def max_corner(self) -> np.ndarray:
        return self.origin + np.array([self.width, self.height]) * self.resolution

    def world_to_cell(self, points) -> np.ndarray:
        """Cell indices (..., 2) as (ix, iy) for world points; no bounds check."""
        pts = np.asarray(points, dtype=float)
        return np.floor((pts - self.origin) / self.resolution).astype(np.int64)

    def cell_center(self, ix, iy) -> np.ndarray:
        """World coordinates of cell centers; accepts scalars or arrays."""
        x = self.origin[0] + (np.asarray(ix) + 0.5) * self.resolution
        y = self.origin[1] + (np.asarray(iy) + 0.5) * self.resolution
        return np.stack(np.broadcast_arrays(x, y), axis=-1)

    def cell_in_bounds(self, ix, iy):
        return (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)

    def state_at(self, point) -> int:
        """Cell state at a world point; raises IndexError out of bounds."""
        ix, iy = self.world_to_cell(point)
        if not self.cell_in_bounds(ix, iy):
            raise IndexError(f"point {point} outside the grid")
        return int(self.cells[iy, ix])

    def blocking(self, unknown_as_occupied: bool = True) -> np.ndarray:
        """Boolean mask of cells that block rays / robot footprints.

        Cached per flag; cells are treated as immutable once a grid is in use
        (map edits construct new grids).
        """
        cache = self.__dict__.setdefault("_blocking_cache", {})
        mask = cache.get(unknown_as_occupied)
        if mask is None:
            if unknown_as_occupied:
                mask = self.cells != FREE
            else:
                mask = self.cells == OCCUPIED
            cache[unknown_as_occupied] = mask
        return mask


def in_sampling_boundary(grid: OccupancyGrid, point) -> bool:
    """True iff the world point lies inside the grid's bounding rectangle (closed)."""
    p = np.asarray(point, dtype=float)
    lo = grid.origin
    hi = grid.max_corner
    return bool(np.all(p >= lo) and np.all(p <= hi))


def _classify(prob: np.ndarray, occupied_thresh: float, free_thresh: float) -> np.ndarray:
    cells = np.full(prob.shape, UNKNOWN, dtype=np.int8)
    cells[prob > occupied_thresh] = OCCUPIED
    cells[prob < free_thresh] = FREE
    return cells


def _read_pgm(path: Path) -> np.ndarray:
    """Read a binary (P5) PGM; returns a (rows, cols) uint8 array, top row first."""
    data = path.read_bytes()
    # Header tokens: magic, width, height, maxval; '#' comments run to end of line.
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise MapLoadError(f"{path}: truncated PGM header")
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            pos = data.find(b"\n", pos)
            if pos < 0:
                raise MapLoadError(f"{path}: unterminated PGM comment")
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    if tokens[0] != b"P5":
        raise MapLoadError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise MapLoadError(f"{path}: bad PGM header") from exc
    if maxval != 255:
        raise MapLoadError(f"{path}: unsupported maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos:]
    if len(raster) != width * height:
        raise MapLoadError(
            f"{path}: raster has {len(raster)} bytes, expected {width * height}"
        )
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def _write_pgm(path: Path, raster: np.ndarray) -> None:
    h, w = raster.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    path.write_bytes(header + raster.astype(np.uint8).tobytes())


def load_map(path) -> OccupancyGrid:
    """Load a grid from a YAML descriptor + PGM raster pair."""
    path = Path(path)
    try:
        meta = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise MapLoadError(f"cannot read map descriptor {path}: {exc}") from exc
    if not isinstance(meta, dict):
        raise MapLoadError(f"{path}: descriptor is not a key-value mapping")
    try:
        image = meta["image"]
        resolution = float(meta["resolution"])
        origin = meta["origin"]
    except KeyError as exc:
        raise MapLoadError(f"{path}: missing required key {exc}") from exc
    if resolution <= 0:
        raise MapLoadError(f"{path}: resolution must be positive, got {resolution}")
    origin = [float(v) for v in origin]
    if len(origin) not in (2, 3):
        raise MapLoadError(f"{path}: origin must be [x, y, yaw]")
    yaw = origin[2] if len(origin) == 3 else 0.0
    if abs(yaw) > 1e-12:
        raise MapLoadError(f"{path}: nonzero origin yaw ({yaw}) is not supported")
    occupied_thresh = float(meta.get("occupied_thresh", DEFAULT_OCCUPIED_THRESH))
    free_thresh = float(meta.get("free_thresh", DEFAULT_FREE_THRESH))
    negate = int(meta.get("negate", 0))

    image_path = Path(image)
    if not image_path.is_absolute():
        image_path = path.parent / image_path
    if not image_path.exists():
        raise MapLoadError(f"{path}: image file {image_path} not found")
    raster = _read_pgm(image_path)
    if negate:
        prob = raster.astype(float) / 255.0
    else:
        prob = (255.0 - raster.astype(float)) / 255.0
    cells = _classify(prob, occupied_thresh, free_thresh)
    # Top raster row is max y; flip so row 0 is min y.
    cells = np.flipud(cells).copy()
    return OccupancyGrid(
        cells=cells,
        resolution=resolution,
        origin=np.array(origin[:2]),
        occupied_thresh=occupied_thresh,
        free_thresh=free_thresh,
        name=path.stem,
    )


def save_map(grid: OccupancyGrid, yaml_path) -> Path:
    """Write a grid as descriptor + PGM; returns the descriptor path."""
    yaml_path = Path(yaml_path)
    pgm_path = yaml_path.with_suffix(".pgm")
    raster = np.flipud(np.take(np.array([_PGM_VALUE[FREE], _PGM_VALUE[OCCUPIED],
                                         _PGM_VALUE[UNKNOWN]], dtype=np.uint8),
                               grid.cells))
    _write_pgm(pgm_path, raster)
    # Hand-formatted for stable bytes across runs.
    text = (
        f"image: {pgm_path.name}\n"
        f"resolution: {grid.resolution!r}\n"
        f"origin: [{grid.origin[0]!r}, {grid.origin[1]!r}, 0.0]\n"
        f"occupied_thresh: {grid.occupied_thresh!r}\n"
        f"free_thresh: {grid.free_thresh!r}\n"
        f"negate: 0\n"
    )
    yaml_path.write_text(text)
    return yaml_path
