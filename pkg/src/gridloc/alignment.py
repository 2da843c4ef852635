"""Scan-to-map alignment confidence in (0, 1].

Each valid beam endpoint, placed by a candidate pose, is scored by a
likelihood-field model on its distance to the nearest obstacle.  Three
ingredients multiply into the final score: a robust geometric-mean beam
likelihood (FoV-adaptive retention of the best beams, median of three
top-slice means), a mean-distance proximity term, and a distance-variance
consistency term; the cube root of the product keeps the score in (0, 1].

A plain log-likelihood pair (sum, and its normalized Eq-free combination
with the proximity term) is provided as the comparison baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distance_field import DistanceField
from .geometry import Pose
from .scan import DownsampledScan


@dataclass
class LikelihoodParams:
    z_hit: float = 1.0
    sigma_hit: float = 0.2
    z_rand: float = 0.0
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.z_hit <= 0 or self.sigma_hit <= 0:
            raise ValueError("z_hit and sigma_hit must be positive")
        if self.z_rand < 0 or self.epsilon <= 0:
            raise ValueError("z_rand must be >= 0 and epsilon > 0")


@dataclass
class TamParams:
    alpha_mid_min: float = 0.80
    alpha_mid_max: float = 0.90
    alpha_low_min: float = 0.60
    alpha_low_max: float = 0.75
    d_max: float = 1.0
    d_min: float | None = None  # None: resolved to half the map resolution
    s_d_floor: float = 1e-6

    def __post_init__(self):
        for a in (self.alpha_mid_min, self.alpha_mid_max,
                  self.alpha_low_min, self.alpha_low_max):
            if not 0.0 < a < 1.0:
                raise ValueError("retention fractions must lie in (0, 1)")
        if self.alpha_low_min >= self.alpha_mid_min or self.alpha_low_max >= self.alpha_mid_max:
            raise ValueError("alpha_low endpoints must sit below alpha_mid")
        if self.d_max <= 0:
            raise ValueError("d_max must be positive")

    def resolved_d_min(self, resolution: float) -> float:
        d_min = self.d_min if self.d_min is not None else resolution / 2.0
        if not 0 <= d_min < self.d_max:
            raise ValueError(f"d_min {d_min} must lie in [0, d_max)")
        return d_min


@dataclass
class TamBreakdown:
    """The alignment score with its three factors exposed for audits."""

    tam: float
    p: float  # robust geometric-mean beam likelihood
    s_d: float  # mean-distance proximity term
    c: float  # distance-variance consistency term
    ell_bar: float  # robust mean log-likelihood
    d_mean: float
    d_var: float
    n_valid: int


def beam_endpoints(pose: Pose, scan_d: DownsampledScan) -> np.ndarray:
    """World endpoints of the valid beams under the candidate pose."""
    valid = scan_d.valid_mask
    angles = pose.theta + scan_d.beam_angles[valid]
    z = scan_d.ranges[valid]
    return np.stack(
        [pose.x + z * np.cos(angles), pose.y + z * np.sin(angles)], axis=1
    )


def endpoint_distances(
    field: DistanceField, points: np.ndarray, out_of_bounds_distance: float
) -> np.ndarray:
    """Obstacle distances with the out-of-map convention overridden.

    The field reports 0 outside the map; for scoring, an endpoint off the map
    is evidence against the pose, so it takes the saturating distance instead.
    """
    pts = np.atleast_2d(points)
    idx = np.floor((pts - field.origin) / field.resolution).astype(np.int64)
    inb = (
        (idx[:, 0] >= 0)
        & (idx[:, 0] < field.width)
        & (idx[:, 1] >= 0)
        & (idx[:, 1] < field.height)
    )
    out = np.full(len(pts), float(out_of_bounds_distance))
    out[inb] = field.distances[idx[inb, 1], idx[inb, 0]]
    return out


def log_likelihoods_from_distances(d: np.ndarray, params: LikelihoodParams) -> np.ndarray:
    return np.log(
        params.z_hit * np.exp(-(d**2) / (2.0 * params.sigma_hit**2))
        + params.z_rand
        + params.epsilon
    )


def beam_log_likelihoods(
    field: DistanceField,
    pose: Pose,
    scan_d: DownsampledScan,
    params: LikelihoodParams,
    out_of_bounds_distance: float = 1.0,
) -> np.ndarray:
    """Per-valid-beam log-likelihoods of the endpoint obstacle distances."""
    pts = beam_endpoints(pose, scan_d)
    if len(pts) == 0:
        raise ValueError("scan has no valid beams")
    d = endpoint_distances(field, pts, out_of_bounds_distance)
    return log_likelihoods_from_distances(d, params)


def retention_fractions(lam: float, tparams: TamParams) -> tuple[float, float]:
    """Linear interpolation of the two retention fractions in coverage."""
    lam = float(np.clip(lam, 0.0, 1.0))
    a_mid = tparams.alpha_mid_min + lam * (tparams.alpha_mid_max - tparams.alpha_mid_min)
    a_low = tparams.alpha_low_min + lam * (tparams.alpha_low_max - tparams.alpha_low_min)
    return a_mid, a_low


def fov_adaptive_response(ells: np.ndarray, lam: float, tparams: TamParams) -> float:
    """Median of the full / mid-slice / low-slice means of the sorted beams.

    Beams are sorted by descending log-likelihood; the mid and low slices
    keep floor(alpha * n) best beams (at least one), with alphas interpolated
    in the FoV coverage.  The median of the three means rejects a small
    number of corrupted beams in either direction.
    """
    ells = np.asarray(ells, dtype=float)
    n = len(ells)
    if n == 0:
        raise ValueError("no beam log-likelihoods to aggregate")
    a_mid, a_low = retention_fractions(lam, tparams)
    k_mid = max(1, math.floor(a_mid * n))
    k_low = max(1, math.floor(a_low * n))
    ordered = np.sort(ells)[::-1]
    csum = np.cumsum(ordered)
    mean_full = csum[-1] / n
    mean_mid = csum[k_mid - 1] / k_mid
    mean_low = csum[k_low - 1] / k_low
    return float(np.median([mean_full, mean_mid, mean_low]))


def _proximity_term(d_mean: float, d_min: float, d_max: float, floor: float) -> float:
    d_tilde = min(max(d_mean, d_min), d_max)
    s_d = 1.0 - (d_tilde - d_min) / (d_max - d_min)
    return max(s_d, floor)


def tam_score(
    field: DistanceField,
    pose: Pose,
    scan_d: DownsampledScan,
    lparams: LikelihoodParams,
    tparams: TamParams,
) -> TamBreakdown:
    """Alignment confidence of one pose; see the module docstring.

    The raw cube root can exceed 1 by <= (1 + epsilon)^(1/3) - 1 when every
    beam is perfect; the score is clamped to preserve the (0, 1] codomain.
    """
    pts = beam_endpoints(pose, scan_d)
    if len(pts) == 0:
        raise ValueError("scan has no valid beams")
    d = endpoint_distances(field, pts, tparams.d_max)
    ells = log_likelihoods_from_distances(d, lparams)
    lam = scan_d.coverage_ratio()
    ell_bar = fov_adaptive_response(ells, lam, tparams)
    p = math.exp(ell_bar)

    d_mean = float(np.mean(d))
    d_var = float(np.var(d))  # population variance over all valid beams
    d_min = tparams.resolved_d_min(field.resolution)
    s_d = _proximity_term(d_mean, d_min, tparams.d_max, tparams.s_d_floor)
    c = math.exp(-d_var / 2.0)
    tam = min((p * s_d * c) ** (1.0 / 3.0), 1.0)
    return TamBreakdown(
        tam=tam, p=p, s_d=s_d, c=c, ell_bar=ell_bar,
        d_mean=d_mean, d_var=d_var, n_valid=len(pts),
    )


def tam_scores_multi(
    field: DistanceField,
    position,
    thetas: np.ndarray,
    scan_d: DownsampledScan,
    lparams: LikelihoodParams,
    tparams: TamParams,
) -> np.ndarray:
    """tam_score over many headings at one position, vectorized."""
    thetas = np.asarray(thetas, dtype=float)
    valid = scan_d.valid_mask
    if not valid.any():
        raise ValueError("scan has no valid beams")
    phi = scan_d.beam_angles[valid]
    z = scan_d.ranges[valid]
    angles = thetas[:, None] + phi[None, :]
    px = position[0] + z[None, :] * np.cos(angles)
    py = position[1] + z[None, :] * np.sin(angles)

    ix = np.floor((px - field.origin[0]) / field.resolution).astype(np.int64)
    iy = np.floor((py - field.origin[1]) / field.resolution).astype(np.int64)
    inb = (ix >= 0) & (ix < field.width) & (iy >= 0) & (iy < field.height)
    d = np.full(angles.shape, tparams.d_max)
    d[inb] = field.distances[iy[inb], ix[inb]]

    ells = np.log(
        lparams.z_hit * np.exp(-(d**2) / (2.0 * lparams.sigma_hit**2))
        + lparams.z_rand
        + lparams.epsilon
    )
    n = ells.shape[1]
    lam = scan_d.coverage_ratio()
    a_mid, a_low = retention_fractions(lam, tparams)
    k_mid = max(1, math.floor(a_mid * n))
    k_low = max(1, math.floor(a_low * n))
    ordered = -np.sort(-ells, axis=1)
    csum = np.cumsum(ordered, axis=1)
    mean_full = csum[:, -1] / n
    mean_mid = csum[:, k_mid - 1] / k_mid
    mean_low = csum[:, k_low - 1] / k_low
    ell_bar = np.median(np.stack([mean_full, mean_mid, mean_low]), axis=0)
    p = np.exp(ell_bar)

    d_mean = d.mean(axis=1)
    d_var = d.var(axis=1)
    d_min = tparams.resolved_d_min(field.resolution)
    d_tilde = np.clip(d_mean, d_min, tparams.d_max)
    s_d = np.maximum(
        1.0 - (d_tilde - d_min) / (tparams.d_max - d_min), tparams.s_d_floor
    )
    c = np.exp(-d_var / 2.0)
    return np.minimum((p * s_d * c) ** (1.0 / 3.0), 1.0)


def baseline_lf_score(
    field: DistanceField,
    pose: Pose,
    scan_d: DownsampledScan,
    lparams: LikelihoodParams,
    out_of_bounds_distance: float = 1.0,
) -> float:
    """Plain likelihood-field score: sum of the beam log-likelihoods."""
    return float(np.sum(beam_log_likelihoods(
        field, pose, scan_d, lparams, out_of_bounds_distance
    )))


def baseline_normalized(
    field: DistanceField,
    pose: Pose,
    scan_d: DownsampledScan,
    lparams: LikelihoodParams,
    tparams: TamParams,
) -> float:
    """Baseline combination in (0, 1]: sqrt of per-beam likelihood x proximity."""
    pts = beam_endpoints(pose, scan_d)
    if len(pts) == 0:
        raise ValueError("scan has no valid beams")
    d = endpoint_distances(field, pts, tparams.d_max)
    ells = log_likelihoods_from_distances(d, lparams)
    p_lf = float(np.sum(ells))
    d_min = tparams.resolved_d_min(field.resolution)
    s_d = _proximity_term(float(np.mean(d)), d_min, tparams.d_max, tparams.s_d_floor)
    return min(math.sqrt(math.exp(p_lf / len(pts)) * s_d), 1.0)


def baseline_scores_multi(
    field: DistanceField,
    position,
    thetas: np.ndarray,
    scan_d: DownsampledScan,
    lparams: LikelihoodParams,
    tparams: TamParams,
) -> np.ndarray:
    """baseline_normalized over many headings at one position."""
    thetas = np.asarray(thetas, dtype=float)
    out = np.empty(len(thetas))
    for i, th in enumerate(thetas):
        out[i] = baseline_normalized(
            field, Pose(position[0], position[1], float(th)), scan_d, lparams, tparams
        )
    return out


def best_orientation(
    field: DistanceField,
    position,
    scan_d: DownsampledScan,
    thetas,
    lparams: LikelihoodParams,
    tparams: TamParams,
    metric: str = "tam",
) -> tuple[float, float]:
    """(best heading, best score) over a heading set; ties keep the first.

    ``thetas`` may be any sequence of headings or an object exposing
    ``.angles`` (the coarse-metric orientation enumeration).
    """
    angles = np.asarray(getattr(thetas, "angles", thetas), dtype=float)
    if angles.size == 0:
        raise ValueError("empty orientation set")
    position = np.asarray(position, dtype=float)
    if metric == "tam":
        scores = tam_scores_multi(field, position, angles, scan_d, lparams, tparams)
    elif metric == "baseline":
        scores = baseline_scores_multi(field, position, angles, scan_d, lparams, tparams)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    best = int(np.argmax(scores))
    return float(angles[best]), float(scores[best])
