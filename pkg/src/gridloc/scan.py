"""LiDAR scan containers, beam downsampling and panoramic FoV bookkeeping.

Scans live in the sensor frame: beam i points at angle_min + i * increment,
counter-clockwise positive, 0 along the sensor x axis.  Invalid returns (no
echo, dropout, out of range) are all represented by NaN.  The JSON exchange
format is ``{"angle_min", "angle_increment", "range_max", "ranges"}`` with
``null`` for invalid entries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import TWO_PI

INVALID_RANGE = float("nan")


class ScanFormatError(Exception):
    """Raised when a scan file does not match the exchange schema."""


def _sanitize(ranges, range_max: float) -> np.ndarray:
    """Map out-of-range and non-finite returns to the NaN sentinel."""
    z = np.array(ranges, dtype=float)
    bad = ~np.isfinite(z) | (z <= 0.0) | (z > range_max)
    z[bad] = INVALID_RANGE
    return z


@dataclass
class LidarScan:
    """A raw planar scan; ranges are sanitized to the sentinel on construction."""

    angle_min: float
    angle_increment: float
    range_max: float
    ranges: np.ndarray

    def __post_init__(self):
        if self.angle_increment <= 0:
            raise ValueError("angle_increment must be positive")
        if self.range_max <= 0:
            raise ValueError("range_max must be positive")
        self.ranges = _sanitize(self.ranges, self.range_max)
        if self.ranges.ndim != 1 or len(self.ranges) == 0:
            raise ValueError("ranges must be a non-empty 1-D sequence")

    @property
    def n_beams(self) -> int:
        return len(self.ranges)

    @property
    def beam_angles(self) -> np.ndarray:
        return self.angle_min + np.arange(self.n_beams) * self.angle_increment

    @property
    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.ranges)


@dataclass
class DownsampledScan:
    """Every n-th beam of a source scan, starting at beam 0."""

    angle_min: float
    angle_increment: float  # coarse spacing: source increment * n_skip_beam
    range_max: float
    ranges: np.ndarray
    n_skip_beam: int

    @property
    def n_beams(self) -> int:
        return len(self.ranges)

    @property
    def beam_angles(self) -> np.ndarray:
        return self.angle_min + np.arange(self.n_beams) * self.angle_increment

    @property
    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.ranges)

    @property
    def n_valid(self) -> int:
        return int(self.valid_mask.sum())

    def panoramic_count(self) -> int:
        """Number of panoramic bins N_s = 2*pi / spacing; must divide evenly."""
        n = TWO_PI / self.angle_increment
        n_int = round(n)
        if n_int < 1 or abs(n - n_int) > 1e-6 * max(1.0, n):
            raise ValueError(
                f"panoramic bin width {self.angle_increment} does not divide 2*pi"
            )
        return n_int

    def coverage_ratio(self) -> float:
        """Fraction of the full panorama covered by valid beams."""
        lam = self.n_valid * self.angle_increment / TWO_PI
        return float(min(lam, 1.0))


def downsample_scan(scan: LidarScan | DownsampledScan, n_skip_beam: int) -> DownsampledScan:
    """Keep every n_skip_beam-th beam (indices 0, n, 2n, ...)."""
    if n_skip_beam < 1:
        raise ValueError("n_skip_beam must be >= 1")
    base_skip = getattr(scan, "n_skip_beam", 1)
    return DownsampledScan(
        angle_min=scan.angle_min,
        angle_increment=scan.angle_increment * n_skip_beam,
        range_max=scan.range_max,
        ranges=scan.ranges[::n_skip_beam].copy(),
        n_skip_beam=base_skip * n_skip_beam,
    )


@dataclass
class FovSections:
    """Valid-beam runs of a scan mapped onto the panoramic index domain [0, N_s).

    ``sections`` holds inclusive [u, v] index pairs; a run that would cross
    the wrap point appears as two entries.  ``panoramic_ranges`` places each
    valid beam's range at its panoramic index (NaN elsewhere) so cyclic
    comparisons can be indexed directly.
    """

    sections: list[tuple[int, int]]
    n_panoramic: int
    panoramic_ranges: np.ndarray
    total_valid: int = field(init=False)
    coverage: float = field(init=False)

    def __post_init__(self):
        self.total_valid = sum(v - u + 1 for u, v in self.sections)
        self.coverage = self.total_valid / self.n_panoramic

    @property
    def section_indices(self) -> np.ndarray:
        """All panoramic indices covered by the sections, ascending."""
        if not self.sections:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([np.arange(u, v + 1) for u, v in self.sections])


def extract_fov_sections(scan_d: DownsampledScan, n_panoramic: int | None = None) -> FovSections:
    """Bin valid beams into panoramic indices and collect maximal runs."""
    n_s = scan_d.panoramic_count() if n_panoramic is None else int(n_panoramic)
    bin_width = TWO_PI / n_s
    # Beam spacing must be a whole number of bins, so only the first beam's
    # offset is rounded; later beams advance by the exact integer step.
    # Rounding each angle separately is unstable when beams sit on bin
    # boundaries (a first beam at -fov/2 puts every beam on one).
    step_f = scan_d.angle_increment / bin_width
    step = round(step_f)
    if step < 1 or abs(step_f - step) > 1e-6 * max(1.0, step_f):
        raise ValueError(
            f"beam spacing {scan_d.angle_increment} is not a whole number of "
            f"panoramic bins (2*pi / {n_s})"
        )
    j0 = math.floor((scan_d.angle_min + math.pi) / bin_width + 0.5)
    idx = (j0 + step * np.arange(scan_d.n_beams, dtype=np.int64)) % n_s

    pan = np.full(n_s, INVALID_RANGE)
    valid = scan_d.valid_mask
    occupied_bins = idx[valid]
    if len(np.unique(occupied_bins)) != len(occupied_bins):
        raise ValueError("multiple valid beams map to one panoramic bin; "
                         "scan is denser than the panoramic grid")
    pan[occupied_bins] = scan_d.ranges[valid]

    mask = np.isfinite(pan)
    sections: list[tuple[int, int]] = []
    start = None
    for j in range(n_s):
        if mask[j] and start is None:
            start = j
        elif not mask[j] and start is not None:
            sections.append((start, j - 1))
            start = None
    if start is not None:
        sections.append((start, n_s - 1))
    return FovSections(sections=sections, n_panoramic=n_s, panoramic_ranges=pan)


def load_scan(path) -> LidarScan:
    """Read the JSON exchange format; ``null`` ranges become the sentinel."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScanFormatError(f"cannot read scan {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ScanFormatError(f"{path}: scan file must be a JSON object")
    try:
        angle_min = float(payload["angle_min"])
        angle_increment = float(payload["angle_increment"])
        range_max = float(payload["range_max"])
        raw = payload["ranges"]
    except KeyError as exc:
        raise ScanFormatError(f"{path}: missing required key {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise ScanFormatError(f"{path}: ranges must be a non-empty list")
    ranges = [math.nan if v is None else float(v) for v in raw]
    try:
        return LidarScan(angle_min, angle_increment, range_max, np.array(ranges))
    except ValueError as exc:
        raise ScanFormatError(f"{path}: {exc}") from exc


def save_scan(scan: LidarScan, path) -> Path:
    """Write the JSON exchange format (NaN -> null); round-trips with load_scan."""
    path = Path(path)
    ranges = [None if not math.isfinite(v) else float(v) for v in scan.ranges]
    payload = {
        "angle_min": scan.angle_min,
        "angle_increment": scan.angle_increment,
        "range_max": scan.range_max,
        "ranges": ranges,
    }
    path.write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")
    return path
