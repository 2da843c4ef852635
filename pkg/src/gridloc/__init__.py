"""Passive 2-D global relocalization on occupancy-grid maps.

Given a single LiDAR scan and a prior map, estimate the robot pose with a
calibrated confidence: sparse feasible positions from a constrained RRT, a
prefix-sum mean-range discrepancy for coarse ranking, a robust alignment
confidence for fine scoring, ICP refinement, and batched processing with
early termination.
"""

from .alignment import (
    LikelihoodParams,
    TamBreakdown,
    TamParams,
    baseline_lf_score,
    baseline_normalized,
    beam_endpoints,
    beam_log_likelihoods,
    best_orientation,
    fov_adaptive_response,
    tam_score,
)
from .coarse_metric import (
    OrientationEnum,
    PrefixSums,
    actual_mean_range,
    build_prefix_sums,
    caer,
    rank_positions,
    smad_at_orientation,
    smad_score,
    synth_mean_range,
)
from .distance_field import (
    DistanceField,
    build_distance_field,
    min_dist_to_obstacle,
    traversability_check,
)
from .geometry import Pose, wrap_angle
from .grid_map import (
    FREE,
    OCCUPIED,
    UNKNOWN,
    MapLoadError,
    OccupancyGrid,
    in_sampling_boundary,
    load_map,
    save_map,
)
from .icp import IcpParams, RefinedPose, icp_refine, map_occupied_points
from .pipeline import (
    PipelineConfig,
    PoseHypothesis,
    RelocalizationResult,
    relocalize,
)
from .raycast import cast_ray, cast_rays, synthesize_panoramic_scan
from .sampler import (
    PositionSet,
    SamplerConfig,
    adaptive_expand_dist,
    sample_hypotheses,
    voxel_downsample,
)
from .scan import (
    DownsampledScan,
    FovSections,
    LidarScan,
    ScanFormatError,
    downsample_scan,
    extract_fov_sections,
    load_scan,
    save_scan,
)
from .simulate import (
    LidarModel,
    draw_free_poses,
    generate_map,
    perturb_map,
    simulate_scan,
)
from .trials import TrialReport, ablation_smad, ablation_tam, run_trials

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
