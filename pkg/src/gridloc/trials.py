"""Closed-loop trial running, ablation studies and metric heatmaps.

A trial simulates a scan at a hidden true pose, runs the relocalization
pipeline against the (possibly unperturbed) map, and scores the estimate:
success means position error < 0.5 m, heading error < 30 degrees, and wall
time within the budget.  Error averages cover successful trials only;
attempts over budget count as failures.  Per-trial seeds derive from the
master seed and the trial coordinates alone, so two configurations replay
identical scans.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .alignment import baseline_scores_multi, tam_scores_multi
from .coarse_metric import (
    OrientationEnum,
    actual_mean_range,
    smad_score,
)
from .distance_field import build_distance_field
from .geometry import Pose, angle_diff
from .grid_map import FREE, OccupancyGrid
from .pipeline import PipelineConfig, relocalize
from .scan import LidarScan, downsample_scan, extract_fov_sections
from .simulate import LidarModel, draw_free_poses, simulate_scan

SUCCESS_DIST_M = 0.5
SUCCESS_ANGLE_DEG = 30.0
DEFAULT_TIME_BUDGET_S = 30.0


@dataclass
class TrialOutcome:
    trial: int
    map_name: str
    pose_idx: int
    repetition: int
    seed: int
    true_pose: Pose
    est_pose: Pose | None
    d_err: float
    phi_err_deg: float
    wall_time: float
    success: bool
    terminated_early: bool
    batches_processed: int
    confidence: float


@dataclass
class TrialReport:
    records: list[TrialOutcome]
    audits: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def n_trials(self) -> int:
        return len(self.records)

    def aggregate(self, records: list[TrialOutcome] | None = None) -> dict:
        recs = self.records if records is None else records
        n = len(recs)
        wins = [r for r in recs if r.success]
        sr = len(wins) / n if n else math.nan
        agg = {
            "n_trials": n,
            "n_success": len(wins),
            "success_rate": sr,
            "t_avg": float(np.mean([r.wall_time for r in wins])) if wins else math.nan,
            "d_err_avg": float(np.mean([r.d_err for r in wins])) if wins else math.nan,
            "phi_err_avg_deg": float(np.mean([r.phi_err_deg for r in wins])) if wins else math.nan,
            "mean_batches": float(np.mean([r.batches_processed for r in recs])) if recs else math.nan,
        }
        return agg

    def per_map(self) -> dict:
        names = sorted({r.map_name for r in self.records})
        return {
            name: self.aggregate([r for r in self.records if r.map_name == name])
            for name in names
        }

    def to_dict(self, include_timings: bool = True) -> dict:
        agg = self.aggregate()
        per_map = self.per_map()
        if not include_timings:
            agg = {k: v for k, v in agg.items() if k != "t_avg"}
            per_map = {
                name: {k: v for k, v in a.items() if k != "t_avg"}
                for name, a in per_map.items()
            }
        return {"aggregate": agg, "per_map": per_map}


TRIAL_CSV_COLUMNS = [
    "trial", "map", "pose_idx", "repetition", "seed",
    "true_x", "true_y", "true_theta", "est_x", "est_y", "est_theta",
    "d_err", "phi_err_deg", "success", "wall_time",
    "terminated_early", "batches_processed", "confidence",
]


def write_trials_csv(report: TrialReport, path, include_timings: bool = True) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIAL_CSV_COLUMNS)
        for r in report.records:
            est = r.est_pose
            writer.writerow([
                r.trial, r.map_name, r.pose_idx, r.repetition, r.seed,
                repr(r.true_pose.x), repr(r.true_pose.y), repr(r.true_pose.theta),
                repr(est.x) if est else "", repr(est.y) if est else "",
                repr(est.theta) if est else "",
                repr(r.d_err), repr(r.phi_err_deg), int(r.success),
                repr(r.wall_time) if include_timings else "",
                int(r.terminated_early), r.batches_processed, repr(r.confidence),
            ])
    return path


def _trial_seed(master: int, map_idx: int, pose_idx: int, rep: int, stream: int) -> int:
    seq = np.random.SeedSequence([int(master), map_idx, pose_idx, rep, stream])
    state = seq.generate_state(2)
    return int(state[0]) << 32 | int(state[1])


def run_trials(
    maps: list,
    model: LidarModel,
    cfg: PipelineConfig,
    n_poses: int = 10,
    repetitions: int = 1,
    time_budget: float = DEFAULT_TIME_BUDGET_S,
    seed: int = 0,
    poses: dict[str, list[Pose]] | None = None,
    collect_audits: bool = False,
) -> TrialReport:
    """Run the pipeline over maps x poses x repetitions.

    ``maps`` entries are (name, grid) pairs or (name, grid, scan_grid)
    triples; scans are simulated on ``scan_grid`` (the perturbed world) and
    relocalization runs against ``grid``.
    """
    records: list[TrialOutcome] = []
    audits: dict[int, np.ndarray] = {}
    trial_no = 0
    for map_idx, entry in enumerate(maps):
        if len(entry) == 3:
            name, grid, scan_grid = entry
        else:
            name, grid = entry
            scan_grid = grid
        if poses and name in poses:
            map_poses = poses[name]
        else:
            map_poses = draw_free_poses(
                scan_grid, n_poses, _trial_seed(seed, map_idx, 0, 0, 99),
                min_clearance=max(cfg.sampler.r_robot, 0.3),
            )
        for pose_idx, true_pose in enumerate(map_poses):
            for rep in range(repetitions):
                scan_seed = _trial_seed(seed, map_idx, pose_idx, rep, 0)
                reloc_seed = _trial_seed(seed, map_idx, pose_idx, rep, 1)
                scan = simulate_scan(scan_grid, true_pose, model, scan_seed)
                t0 = time.perf_counter()
                est = None
                terminated = False
                batches = 0
                confidence = math.nan
                try:
                    result = relocalize(grid, scan, cfg, reloc_seed)
                    est = result.pose
                    terminated = result.terminated_early
                    batches = result.batches_processed
                    confidence = result.confidence
                    if collect_audits:
                        audits[trial_no] = np.array(
                            [math.nan if h.smad is None else h.smad
                             for h in result.audit]
                        )
                except ValueError:
                    pass  # e.g. every beam dropped; counts as a failure
                wall = time.perf_counter() - t0
                if est is not None:
                    d_err = math.hypot(est.x - true_pose.x, est.y - true_pose.y)
                    phi_err = abs(math.degrees(angle_diff(est.theta, true_pose.theta)))
                else:
                    d_err = math.inf
                    phi_err = math.inf
                success = (
                    d_err < SUCCESS_DIST_M
                    and phi_err < SUCCESS_ANGLE_DEG
                    and wall <= time_budget
                )
                records.append(TrialOutcome(
                    trial=trial_no, map_name=name, pose_idx=pose_idx,
                    repetition=rep, seed=reloc_seed, true_pose=true_pose,
                    est_pose=est, d_err=d_err, phi_err_deg=phi_err,
                    wall_time=wall, success=success,
                    terminated_early=terminated, batches_processed=batches,
                    confidence=confidence,
                ))
                trial_no += 1
    return TrialReport(records=records, audits=audits)


def ablation_smad(
    maps: list,
    model: LidarModel,
    cfg: PipelineConfig,
    n_poses: int = 10,
    repetitions: int = 1,
    time_budget: float = DEFAULT_TIME_BUDGET_S,
    seed: int = 0,
) -> dict:
    """Coarse-ranking ablation: random order vs direct vs prefix-sum ranking.

    All three configurations replay identical trials.  The two ranking
    variants must agree: the report carries their max score deviation and
    whether every trial produced the identical hypothesis ordering.
    """
    out: dict = {"configs": {}}
    reports: dict[str, TrialReport] = {}
    for ordering in ("random", "smad_direct", "smad"):
        variant = replace(cfg, ordering=ordering)
        report = run_trials(
            maps, model, variant, n_poses=n_poses, repetitions=repetitions,
            time_budget=time_budget, seed=seed,
            collect_audits=(ordering != "random"),
        )
        reports[ordering] = report
        out["configs"][ordering] = report.aggregate()

    direct = reports["smad_direct"].audits
    prefix = reports["smad"].audits
    max_diff = 0.0
    orderings_identical = True
    for trial in sorted(prefix):
        a, b = prefix[trial], direct.get(trial)
        if b is None or len(a) != len(b):
            orderings_identical = False
            continue
        max_diff = max(max_diff, float(np.max(np.abs(a - b))))
        if not np.array_equal(np.argsort(a, kind="stable"), np.argsort(b, kind="stable")):
            orderings_identical = False
    out["prefix_direct_max_abs_diff"] = max_diff
    out["orderings_identical"] = orderings_identical
    return out


def ablation_tam(
    maps: list,
    model: LidarModel,
    cfg: PipelineConfig,
    rhos: tuple = (1.0, 0.5),
    n_poses: int = 10,
    repetitions: int = 1,
    time_budget: float = DEFAULT_TIME_BUDGET_S,
    seed: int = 0,
) -> dict:
    """Alignment-metric ablation over hypothesis spacings.

    Runs the full pipeline with the alignment score vs the normalized
    log-likelihood baseline at each spacing; identical seeds mean identical
    scans between the two metrics.
    """
    out: dict = {}
    for rho in rhos:
        for metric in ("tam", "baseline"):
            variant = replace(
                cfg, metric=metric, sampler=replace(cfg.sampler, rho=float(rho))
            )
            report = run_trials(
                maps, model, variant, n_poses=n_poses, repetitions=repetitions,
                time_budget=time_budget, seed=seed,
            )
            out[f"rho={rho}:{metric}"] = report.aggregate()
    return out


def smad_spatial_heatmap(
    grid: OccupancyGrid,
    scan: LidarScan,
    cfg: PipelineConfig,
    stride_m: float = 0.25,
) -> list[tuple[float, float, float]]:
    """Coarse score over a lattice of feasible positions; (x, y, score) rows."""
    field_ = build_distance_field(grid, cfg.unknown_as_occupied)
    scan_d = downsample_scan(scan, cfg.n_skip_beam)
    sections = extract_fov_sections(scan_d)
    z_bar = actual_mean_range(sections)
    enum = OrientationEnum.with_target_count(
        sections.n_panoramic, scan_d.angle_increment, cfg.smad_enum_target
    )
    stride = max(1, int(round(stride_m / grid.resolution)))
    rows = []
    for iy in range(0, grid.height, stride):
        for ix in range(0, grid.width, stride):
            if grid.cells[iy, ix] != FREE:
                continue
            center = grid.cell_center(ix, iy)
            if field_.distances[iy, ix] < cfg.sampler.r_robot:
                continue
            score = smad_score(
                grid, field_, center, scan_d, sections, enum, scan.range_max,
                z_bar=z_bar, lam_threshold=cfg.smad_lam_threshold,
            )
            rows.append((float(center[0]), float(center[1]), float(score)))
    return rows


def tam_translation_sweep(
    grid: OccupancyGrid,
    scan: LidarScan,
    true_pose: Pose,
    cfg: PipelineConfig,
    extent_m: float = 0.7,
    step_m: float = 0.1,
    dtheta_step_deg: float = 10.0,
) -> list[dict]:
    """Metric response and orientation-argmax error under translation offsets.

    For each x offset from the true pose, both metrics are evaluated over a
    full heading sweep; each row carries the per-pose scores plus the per-dx
    heading-argmax errors (constant within a dx group).
    """
    field_ = build_distance_field(grid, cfg.unknown_as_occupied)
    scan_d = downsample_scan(scan, cfg.n_skip_beam)
    n_dx = int(round(2 * extent_m / step_m)) + 1
    dxs = -extent_m + step_m * np.arange(n_dx)
    n_th = int(round(360.0 / dtheta_step_deg))
    dthetas = np.radians(dtheta_step_deg * np.arange(n_th))
    thetas = true_pose.theta + dthetas

    rows = []
    for dx in dxs:
        position = np.array([true_pose.x + dx, true_pose.y])
        tams = tam_scores_multi(
            field_, position, thetas, scan_d, cfg.lparams, cfg.tparams
        )
        bases = baseline_scores_multi(
            field_, position, thetas, scan_d, cfg.lparams, cfg.tparams
        )
        tam_err = abs(math.degrees(angle_diff(
            float(thetas[int(np.argmax(tams))]), true_pose.theta
        )))
        base_err = abs(math.degrees(angle_diff(
            float(thetas[int(np.argmax(bases))]), true_pose.theta
        )))
        for j in range(n_th):
            rows.append({
                "dx": float(dx),
                "dtheta_deg": float(math.degrees(dthetas[j])),
                "tam": float(tams[j]),
                "baseline": float(bases[j]),
                "tam_argmax_err_deg": tam_err,
                "baseline_argmax_err_deg": base_err,
            })
    return rows


def write_heatmap_csv(rows, path) -> Path:
    path = Path(path)
    if not rows:
        raise ValueError("no heatmap rows to write")
    with path.open("w", newline="") as fh:
        if isinstance(rows[0], dict):
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        else:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "smad"])
            writer.writerows(rows)
    return path


def save_report_json(report: TrialReport, path, include_timings: bool = True) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(include_timings), indent=2,
                               sort_keys=True) + "\n")
    return path
