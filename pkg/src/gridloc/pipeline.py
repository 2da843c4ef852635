"""Batched multi-stage relocalization with early termination.

Stages: sample feasible positions (RRT), rank them all by the coarse
mean-range discrepancy (ascending), then process ranked batches.  Within a
batch every position gets a best orientation over a fixed heading set, the
local top-k by alignment score are refined with ICP and re-scored, and the
run stops at the first batch whose best re-scored confidence reaches tau.
If no batch reaches tau the best hypothesis seen anywhere is returned.

All reductions are index-ordered, so results are identical for any worker
count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .alignment import (
    LikelihoodParams,
    TamParams,
    baseline_normalized,
    best_orientation,
    tam_score,
)
from .coarse_metric import (
    DEFAULT_LAM_THRESHOLD,
    OrientationEnum,
    actual_mean_range,
    rank_positions,
    smad_score,
)
from .distance_field import build_distance_field
from .geometry import Pose
from .grid_map import OccupancyGrid
from .icp import IcpParams, icp_refine, map_occupied_points
from .sampler import SamplerConfig, sample_hypotheses
from .scan import DownsampledScan, LidarScan, downsample_scan, extract_fov_sections

ORDERINGS = ("smad", "smad_direct", "random")
METRICS = ("tam", "baseline")


@dataclass
class PipelineConfig:
    batch_size: int = 200
    top_k: int = 20
    tau: float = 0.95
    orientation_count: int = 32
    n_skip_beam: int = 4
    icp_full_resolution: bool = False
    worker_count: int = 1
    ordering: str = "smad"
    metric: str = "tam"
    smad_lam_threshold: float = DEFAULT_LAM_THRESHOLD
    smad_enum_target: int = 32
    start: tuple[float, float] = (0.0, 0.0)
    unknown_as_occupied: bool = True
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    lparams: LikelihoodParams = field(default_factory=LikelihoodParams)
    tparams: TamParams = field(default_factory=TamParams)
    icp: IcpParams = field(default_factory=IcpParams)

    def __post_init__(self):
        if self.batch_size < 1 or self.top_k < 1:
            raise ValueError("batch_size and top_k must be >= 1")
        if not 0.0 < self.tau <= 1.0 + 1e-12:
            raise ValueError("tau must lie in (0, 1]")
        if self.orientation_count < 1:
            raise ValueError("orientation_count must be >= 1")
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start"] = list(self.start)
        # Execution hint, not semantics: results are worker-count invariant,
        # so the echo must not vary with it either.
        del d["worker_count"]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        nested = {
            "sampler": SamplerConfig,
            "lparams": LikelihoodParams,
            "tparams": TamParams,
            "icp": IcpParams,
        }
        kwargs = {}
        for key, sub_cls in nested.items():
            if key in data:
                sub = data.pop(key)
                _check_keys(sub_cls, sub, key)
                kwargs[key] = sub_cls(**sub)
        _check_keys(cls, data, "config", skip=set(nested))
        if "start" in data:
            data["start"] = tuple(float(v) for v in data["start"])
        return cls(**data, **kwargs)


def _check_keys(cls, data: dict, label: str, skip: set | None = None) -> None:
    import dataclasses

    known = {f.name for f in dataclasses.fields(cls)} | (skip or set())
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {label} keys: {sorted(unknown)}")


@dataclass
class PoseHypothesis:
    """Per-hypothesis audit record across pipeline stages."""

    index: int  # row in the sampled position set
    x: float
    y: float
    stage: str = "sampled"
    smad: Optional[float] = None
    batch: Optional[int] = None
    theta_star: Optional[float] = None
    score_initial: Optional[float] = None
    icp_converged: Optional[bool] = None
    icp_iterations: Optional[int] = None
    refined_x: Optional[float] = None
    refined_y: Optional[float] = None
    refined_theta: Optional[float] = None
    score_refined: Optional[float] = None

    def final_pose(self) -> Pose:
        if self.refined_x is not None:
            return Pose(self.refined_x, self.refined_y, self.refined_theta)
        return Pose(self.x, self.y, self.theta_star or 0.0)

    def final_score(self) -> float:
        if self.score_refined is not None:
            return self.score_refined
        if self.score_initial is not None:
            return self.score_initial
        return -math.inf


@dataclass
class RelocalizationResult:
    pose: Pose
    confidence: float
    terminated_early: bool
    batches_processed: int
    n_batches: int
    hypotheses_evaluated: int
    n_hypotheses: int
    seed: int
    timings: dict
    total_seconds: float
    config: PipelineConfig
    audit: list[PoseHypothesis]

    def to_dict(self, include_timings: bool = True) -> dict:
        out = {
            "pose": {"x": self.pose.x, "y": self.pose.y, "theta": self.pose.theta},
            "confidence": self.confidence,
            "terminated_early": self.terminated_early,
            "batches_processed": self.batches_processed,
            "n_batches": self.n_batches,
            "hypotheses_evaluated": self.hypotheses_evaluated,
            "n_hypotheses": self.n_hypotheses,
            "seed": self.seed,
            "config": self.config.to_dict(),
        }
        if include_timings:
            out["timings"] = dict(self.timings)
            out["total_seconds"] = self.total_seconds
        return out


def _derive_seed(seed: int, stream: int) -> int:
    state = np.random.SeedSequence([int(seed), int(stream)]).generate_state(2)
    return int(state[0]) << 32 | int(state[1])


def _map_ordered(fn, items, workers: int):
    """Order-preserving map, optionally fanned out over threads."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


class _RunContext:
    """Shared read-only state for one relocalization run."""

    def __init__(self, grid: OccupancyGrid, scan: LidarScan, cfg: PipelineConfig):
        self.grid = grid
        self.cfg = cfg
        self.field = build_distance_field(grid, cfg.unknown_as_occupied)
        self.scan_d: DownsampledScan = downsample_scan(scan, cfg.n_skip_beam)
        if self.scan_d.n_valid == 0:
            raise ValueError("scan has no valid beams after downsampling")
        # Refinement may run on the undecimated scan; scoring never does.
        self.scan_icp = (
            downsample_scan(scan, 1) if cfg.icp_full_resolution else self.scan_d
        )
        self.sections = extract_fov_sections(self.scan_d)
        self.z_bar = actual_mean_range(self.sections)
        n_s = self.sections.n_panoramic
        self.enum = OrientationEnum.with_target_count(
            n_s, self.scan_d.angle_increment, cfg.smad_enum_target
        )
        self.range_max = scan.range_max
        self.thetas = -math.pi + np.arange(cfg.orientation_count) * (
            2.0 * math.pi / cfg.orientation_count
        )
        self.map_points = map_occupied_points(grid)
        self.map_tree = cKDTree(self.map_points)

    def coarse_score(self, position) -> float:
        return smad_score(
            self.grid,
            self.field,
            position,
            self.scan_d,
            self.sections,
            self.enum,
            self.range_max,
            z_bar=self.z_bar,
            lam_threshold=self.cfg.smad_lam_threshold,
            use_prefix=(self.cfg.ordering != "smad_direct"),
        )

    def rescore(self, pose: Pose) -> float:
        if self.cfg.metric == "baseline":
            return baseline_normalized(
                self.field, pose, self.scan_d, self.cfg.lparams, self.cfg.tparams
            )
        return tam_score(
            self.field, pose, self.scan_d, self.cfg.lparams, self.cfg.tparams
        ).tam


def process_batch(
    ctx: _RunContext,
    records: list[PoseHypothesis],
    batch_index: int,
) -> Optional[PoseHypothesis]:
    """Orient, refine and re-score one batch; returns the batch best."""
    cfg = ctx.cfg

    def orient(rec: PoseHypothesis) -> tuple[float, float]:
        return best_orientation(
            ctx.field,
            np.array([rec.x, rec.y]),
            ctx.scan_d,
            ctx.thetas,
            cfg.lparams,
            cfg.tparams,
            metric=cfg.metric,
        )

    oriented = _map_ordered(orient, records, cfg.worker_count)
    for rec, (theta, score) in zip(records, oriented):
        rec.batch = batch_index
        rec.theta_star = theta
        rec.score_initial = score
        rec.stage = "oriented"

    # Local top-k by the pre-refinement score; ties keep the lower index.
    order = sorted(records, key=lambda r: (-r.score_initial, r.index))
    keep = order[: cfg.top_k]

    def refine(rec: PoseHypothesis):
        initial = Pose(rec.x, rec.y, rec.theta_star)
        refined = icp_refine(
            ctx.scan_icp, initial, ctx.map_points, cfg.icp, tree=ctx.map_tree
        )
        # A refinement that aborted (too few matches) returns the initial
        # pose, so re-scoring it reproduces the pre-refinement score and the
        # hypothesis competes unrefined; no branching needed.
        return refined, ctx.rescore(refined.pose)

    refinements = _map_ordered(refine, keep, cfg.worker_count)
    for rec, (refined, score) in zip(keep, refinements):
        rec.icp_converged = refined.converged
        rec.icp_iterations = refined.iterations_used
        rec.refined_x = refined.pose.x
        rec.refined_y = refined.pose.y
        rec.refined_theta = refined.pose.theta
        rec.score_refined = score
        rec.stage = "re_evaluated"

    best = None
    for rec in keep:
        if best is None or rec.final_score() > best.final_score() or (
            rec.final_score() == best.final_score() and rec.index < best.index
        ):
            best = rec
    return best


def relocalize(
    grid: OccupancyGrid,
    scan: LidarScan,
    cfg: PipelineConfig,
    seed: int = 0,
) -> RelocalizationResult:
    """Estimate the scan's pose on the map; see the module docstring."""
    t_start = time.perf_counter()
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    ctx = _RunContext(grid, scan, cfg)
    timings["setup"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sampler_cfg = replace(cfg.sampler, rng_seed=_derive_seed(seed, 0))
    hypotheses = sample_hypotheses(grid, ctx.field, np.asarray(cfg.start, float), sampler_cfg)
    positions = hypotheses.positions
    timings["sampling"] = time.perf_counter() - t0

    records = [
        PoseHypothesis(index=i, x=float(p[0]), y=float(p[1]))
        for i, p in enumerate(positions)
    ]

    t0 = time.perf_counter()
    if cfg.ordering == "random":
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
        order = rng.permutation(len(positions))
        for rec in records:
            rec.stage = "coarse_ranked"
    else:
        scores = _map_ordered(
            lambda i: ctx.coarse_score(positions[i]),
            range(len(positions)),
            cfg.worker_count,
        )
        for rec, s in zip(records, scores):
            rec.smad = float(s)
            rec.stage = "coarse_ranked"
        order = rank_positions(scores)
    timings["coarse_ranking"] = time.perf_counter() - t0

    n_batches = math.ceil(len(order) / cfg.batch_size)
    best: Optional[PoseHypothesis] = None
    terminated_early = False
    batches_processed = 0
    hypotheses_evaluated = 0

    t0 = time.perf_counter()
    for b in range(n_batches):
        chunk = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
        batch_records = [records[i] for i in chunk]
        batch_best = process_batch(ctx, batch_records, b)
        batches_processed += 1
        hypotheses_evaluated += len(batch_records)
        if batch_best is not None:
            if best is None or batch_best.final_score() > best.final_score():
                best = batch_best
            if batch_best.final_score() >= cfg.tau:
                terminated_early = True
                break
    timings["batch_processing"] = time.perf_counter() - t0

    if best is None:  # no batch produced a scored hypothesis
        raise RuntimeError("relocalization produced no scored hypotheses")

    total = time.perf_counter() - t_start
    return RelocalizationResult(
        pose=best.final_pose(),
        confidence=best.final_score(),
        terminated_early=terminated_early,
        batches_processed=batches_processed,
        n_batches=n_batches,
        hypotheses_evaluated=hypotheses_evaluated,
        n_hypotheses=len(positions),
        seed=int(seed),
        timings=timings,
        total_seconds=total,
        config=cfg,
        audit=records,
    )
