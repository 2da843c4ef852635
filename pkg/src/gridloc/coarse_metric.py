"""Scalar coarse ranking: mean-range discrepancy with prefix-sum windows.

A query position is scored by the absolute difference between the mean of
the scan's valid ranges and the mean of the synthesized panoramic ranges
that fall inside the scan's FoV sections, shifted by a candidate orientation
offset.  Doubling the panoramic range array and prefix-summing it makes each
shifted window mean O(sections) regardless of section width.  When the scan
covers at least ``lam_threshold`` of the panorama the orientation term is
dropped (offset 0 only); otherwise the minimum over an orientation
enumeration is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distance_field import DistanceField, min_dist_to_obstacle
from .geometry import wrap_angle
from .grid_map import OccupancyGrid
from .raycast import synthesize_panoramic_scan
from .scan import DownsampledScan, FovSections

DEFAULT_LAM_THRESHOLD = 0.9
DEFAULT_ORIENTATION_COUNT = 32


@dataclass
class PrefixSums:
    """Cumulative sums of the doubled panoramic range array.

    values[t] = sum of the first t entries of ranges tiled twice, so the
    cyclic window sum over panoramic indices [u, v] shifted by m is
    values[v + 1 + m] - values[u + m] for any shift m in [0, N_s).
    """

    values: np.ndarray  # length 2 * n_beams + 1
    n_beams: int

    def window_sum(self, u: int, v: int, m: int = 0) -> float:
        return float(self.values[v + 1 + m] - self.values[u + m])


@dataclass
class OrientationEnum:
    """Candidate orientation offsets over the panoramic bins."""

    offsets: np.ndarray  # int, subset of [0, n_panoramic)
    bin_width: float  # radians per panoramic bin

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.int64)

    @property
    def angles(self) -> np.ndarray:
        return wrap_angle(self.offsets * self.bin_width)

    @classmethod
    def with_stride(cls, n_panoramic: int, bin_width: float, stride: int) -> "OrientationEnum":
        if stride < 1:
            raise ValueError("stride must be >= 1")
        return cls(offsets=np.arange(0, n_panoramic, stride), bin_width=bin_width)

    @classmethod
    def with_target_count(
        cls, n_panoramic: int, bin_width: float, count: int = DEFAULT_ORIENTATION_COUNT
    ) -> "OrientationEnum":
        """Stride chosen so the enumeration size is close to ``count``."""
        stride = max(1, round(n_panoramic / count))
        return cls.with_stride(n_panoramic, bin_width, stride)


def actual_mean_range(sections: FovSections) -> float:
    """Mean of the valid ranges across all FoV sections."""
    idx = sections.section_indices
    if len(idx) == 0:
        raise ValueError("scan has no valid beams")
    return float(np.mean(sections.panoramic_ranges[idx]))


def build_prefix_sums(synth_ranges: np.ndarray) -> PrefixSums:
    r = np.asarray(synth_ranges, dtype=float)
    doubled = np.concatenate([r, r])
    values = np.concatenate([[0.0], np.cumsum(doubled)])
    return PrefixSums(values=values, n_beams=len(r))


def synth_mean_range(prefix: PrefixSums, sections: FovSections, m: int) -> float:
    """Mean synthesized range inside the sections shifted by offset m."""
    if sections.total_valid == 0:
        raise ValueError("scan has no valid beams")
    total = 0.0
    for u, v in sections.sections:
        total += prefix.window_sum(u, v, m)
    return total / sections.total_valid


def synth_mean_range_direct(synth_ranges: np.ndarray, sections: FovSections, m: int) -> float:
    """Prefix-free reference: sum the shifted windows directly (cyclic)."""
    if sections.total_valid == 0:
        raise ValueError("scan has no valid beams")
    r = np.asarray(synth_ranges, dtype=float)
    n = len(r)
    total = 0.0
    for u, v in sections.sections:
        idx = (np.arange(u, v + 1) + m) % n
        total += float(r[idx].sum())
    return total / sections.total_valid


def smad_at_orientation(z_bar: float, prefix: PrefixSums, sections: FovSections, m: int) -> float:
    return abs(z_bar - synth_mean_range(prefix, sections, m))


def smad_all_orientations(
    z_bar: float, prefix: PrefixSums, sections: FovSections, offsets: np.ndarray
) -> np.ndarray:
    """Vectorized |z_bar - synth mean| for every offset."""
    offsets = np.asarray(offsets, dtype=np.int64)
    us = np.array([u for u, _ in sections.sections], dtype=np.int64)
    vs = np.array([v for _, v in sections.sections], dtype=np.int64)
    sums = (
        prefix.values[vs[:, None] + 1 + offsets[None, :]]
        - prefix.values[us[:, None] + offsets[None, :]]
    ).sum(axis=0)
    return np.abs(z_bar - sums / sections.total_valid)


def caer(sections: FovSections, synth_ranges: np.ndarray, m: int) -> float:
    """Mean absolute per-beam range error at offset m (cyclic, valid beams)."""
    idx = sections.section_indices
    if len(idx) == 0:
        raise ValueError("scan has no valid beams")
    r = np.asarray(synth_ranges, dtype=float)
    shifted = r[(idx + m) % len(r)]
    return float(np.mean(np.abs(sections.panoramic_ranges[idx] - shifted)))


def smad_score(
    grid: OccupancyGrid,
    field: DistanceField,
    position,
    scan_d: DownsampledScan,
    sections: FovSections,
    enum: OrientationEnum,
    range_max: float,
    z_bar: float | None = None,
    lam_threshold: float = DEFAULT_LAM_THRESHOLD,
    use_prefix: bool = True,
) -> float:
    """Coarse discrepancy of a query position (lower is better).

    With near-panoramic coverage only the zero offset is evaluated; partial
    FoVs take the minimum over the orientation enumeration.
    """
    position = np.asarray(position, dtype=float)
    if min_dist_to_obstacle(field, position) <= 0.0:
        raise ValueError(f"query position {position} is not in free space")
    if z_bar is None:
        z_bar = actual_mean_range(sections)
    synth = synthesize_panoramic_scan(grid, position, sections.n_panoramic, range_max)
    if use_prefix:
        prefix = build_prefix_sums(synth.ranges)
        if sections.coverage >= lam_threshold:
            return smad_at_orientation(z_bar, prefix, sections, 0)
        return float(np.min(smad_all_orientations(z_bar, prefix, sections, enum.offsets)))
    if sections.coverage >= lam_threshold:
        return abs(z_bar - synth_mean_range_direct(synth.ranges, sections, 0))
    vals = [
        abs(z_bar - synth_mean_range_direct(synth.ranges, sections, int(m)))
        for m in enum.offsets
    ]
    return float(min(vals))


def rank_positions(scores) -> np.ndarray:
    """Indices sorted by ascending score; ties keep input order."""
    return np.argsort(np.asarray(scores, dtype=float), kind="stable")
