"""Command-line front end.

Subcommands: relocalize, simulate, genmap, trial, ablation, heatmap.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .geometry import Pose
from .grid_map import MapLoadError, load_map, save_map
from .pipeline import PipelineConfig, RelocalizationResult, relocalize
from .scan import ScanFormatError, load_scan, save_scan
from .simulate import LidarModel, draw_free_poses, generate_map, perturb_map, simulate_scan
from .trials import (
    ablation_smad,
    ablation_tam,
    run_trials,
    save_report_json,
    smad_spatial_heatmap,
    tam_translation_sweep,
    write_heatmap_csv,
    write_trials_csv,
)

AUDIT_COLUMNS = [
    "index", "x", "y", "stage", "smad", "batch", "theta_star",
    "score_initial", "icp_converged", "icp_iterations",
    "refined_x", "refined_y", "refined_theta", "score_refined",
]


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the interface pins that to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_pose(text: str) -> Pose:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"pose must be x,y,theta; got {text!r}")
    x, y, theta = (float(p) for p in parts)
    return Pose(x, y, theta)


def _parse_size(text: str) -> tuple[float, float]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"size must be WxH in meters; got {text!r}")
    return float(parts[0]), float(parts[1])


def _load_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read JSON file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return data


def _grid_from_spec(spec: dict):
    """(name, score_grid, scan_grid) from a map spec object."""
    if "path" in spec:
        grid = load_map(spec["path"])
    else:
        for key in ("kind", "size", "resolution"):
            if key not in spec:
                raise ValueError(f"map spec needs {key!r} (or 'path')")
        kwargs = {}
        if "min_obstacles" in spec:
            kwargs["min_obstacles"] = int(spec["min_obstacles"])
        grid = generate_map(
            spec["kind"], tuple(spec["size"]), float(spec["resolution"]),
            int(spec.get("seed", 0)), **kwargs,
        )
    scan_grid = grid
    if "perturb" in spec:
        p = spec["perturb"]
        kwargs = {}
        if "max_area_m2" in p:
            kwargs["max_area_m2"] = float(p["max_area_m2"])
        scan_grid = perturb_map(grid, p["kind"], int(p.get("seed", 0)), **kwargs)
    return spec.get("name", grid.name), grid, scan_grid


def _pipeline_from_spec(spec: dict) -> PipelineConfig:
    return PipelineConfig.from_dict(spec.get("pipeline", {}))


def _lidar_from_spec(spec: dict) -> LidarModel:
    return LidarModel.from_dict(spec.get("lidar", {}))


def write_audit_csv(result: RelocalizationResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AUDIT_COLUMNS)
        for h in result.audit:
            writer.writerow([
                h.index, repr(h.x), repr(h.y), h.stage,
                "" if h.smad is None else repr(h.smad),
                "" if h.batch is None else h.batch,
                "" if h.theta_star is None else repr(h.theta_star),
                "" if h.score_initial is None else repr(h.score_initial),
                "" if h.icp_converged is None else int(h.icp_converged),
                "" if h.icp_iterations is None else h.icp_iterations,
                "" if h.refined_x is None else repr(h.refined_x),
                "" if h.refined_y is None else repr(h.refined_y),
                "" if h.refined_theta is None else repr(h.refined_theta),
                "" if h.score_refined is None else repr(h.score_refined),
            ])
    return path


def _cmd_relocalize(args) -> int:
    grid = load_map(args.map)
    scan = load_scan(args.scan)
    cfg = PipelineConfig.from_dict(_load_json(args.config))
    result = relocalize(grid, scan, cfg, args.seed)
    Path(args.out).write_text(
        json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    if args.audit:
        write_audit_csv(result, args.audit)
    return 0


def _cmd_simulate(args) -> int:
    grid = load_map(args.map)
    pose = _parse_pose(args.pose)
    model = LidarModel.from_dict(_load_json(args.lidar))
    scan = simulate_scan(grid, pose, model, args.seed)
    save_scan(scan, args.out)
    return 0


def _cmd_genmap(args) -> int:
    size = _parse_size(args.size)
    grid = generate_map(args.kind, size, args.res, args.seed)
    save_map(grid, args.out)
    return 0


def _cmd_trial(args) -> int:
    spec = _load_json(args.spec)
    maps = [_grid_from_spec(m) for m in spec.get("maps", [])]
    if not maps:
        raise ValueError("trial spec has no maps")
    model = _lidar_from_spec(spec)
    cfg = _pipeline_from_spec(spec)
    poses = None
    if "poses" in spec:
        poses = {
            name: [Pose(*p) for p in plist]
            for name, plist in spec["poses"].items()
        }
    report = run_trials(
        maps, model, cfg,
        n_poses=int(spec.get("n_poses", 10)),
        repetitions=int(spec.get("repetitions", 1)),
        time_budget=float(spec.get("time_budget", 30.0)),
        seed=int(spec.get("seed", 0)),
        poses=poses,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trials_csv(report, out_dir / "trials.csv")
    save_report_json(report, out_dir / "report.json")
    return 0


def _cmd_ablation(args) -> int:
    spec = _load_json(args.spec)
    maps = [_grid_from_spec(m) for m in spec.get("maps", [])]
    if not maps:
        raise ValueError("ablation spec has no maps")
    model = _lidar_from_spec(spec)
    cfg = _pipeline_from_spec(spec)
    kwargs = dict(
        n_poses=int(spec.get("n_poses", 10)),
        repetitions=int(spec.get("repetitions", 1)),
        time_budget=float(spec.get("time_budget", 30.0)),
        seed=int(spec.get("seed", 0)),
    )
    if args.which == "smad":
        result = ablation_smad(maps, model, cfg, **kwargs)
    else:
        rhos = tuple(spec.get("rhos", (1.0, 0.5)))
        result = ablation_tam(maps, model, cfg, rhos=rhos, **kwargs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"ablation_{args.which}.json"
    out_path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_heatmap(args) -> int:
    spec = _load_json(args.spec)
    if "map" not in spec:
        raise ValueError("heatmap spec needs a 'map' object")
    _name, grid, scan_grid = _grid_from_spec(spec["map"])
    model = _lidar_from_spec(spec)
    cfg = _pipeline_from_spec(spec)
    if "pose" in spec:
        pose = Pose(*spec["pose"])
    else:
        pose = draw_free_poses(
            scan_grid, 1, int(spec.get("pose_seed", 0)),
            min_clearance=max(cfg.sampler.r_robot, 0.3),
        )[0]
    scan = simulate_scan(scan_grid, pose, model, int(spec.get("seed", 0)))
    if args.kind == "smad_spatial":
        rows = smad_spatial_heatmap(
            grid, scan, cfg, stride_m=float(spec.get("stride_m", 0.25))
        )
    else:
        rows = tam_translation_sweep(
            grid, scan, pose, cfg,
            extent_m=float(spec.get("extent_m", 0.7)),
            step_m=float(spec.get("step_m", 0.1)),
            dtheta_step_deg=float(spec.get("dtheta_step_deg", 10.0)),
        )
    write_heatmap_csv(rows, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridloc",
                     description="Global relocalization on occupancy-grid maps.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("relocalize", help="estimate a scan's pose on a map")
    p.add_argument("--map", required=True)
    p.add_argument("--scan", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--audit", default=None)
    p.set_defaults(func=_cmd_relocalize)

    p = sub.add_parser("simulate", help="simulate a scan at a pose")
    p.add_argument("--map", required=True)
    p.add_argument("--pose", required=True, help="x,y,theta")
    p.add_argument("--lidar", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("genmap", help="generate a synthetic map")
    p.add_argument("--kind", required=True,
                   choices=["empty_room", "cluttered_office", "corridor_loop",
                            "split_rooms"])
    p.add_argument("--size", required=True, help="WxH in meters, e.g. 30x20")
    p.add_argument("--res", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="descriptor path (.yaml)")
    p.set_defaults(func=_cmd_genmap)

    p = sub.add_parser("trial", help="run closed-loop trials")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_trial)

    p = sub.add_parser("ablation", help="run an ablation study")
    p.add_argument("--which", required=True, choices=["smad", "tam"])
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_ablation)

    p = sub.add_parser("heatmap", help="emit a metric heatmap CSV")
    p.add_argument("--kind", required=True,
                   choices=["smad_spatial", "tam_translation_sweep"])
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_heatmap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MapLoadError, ScanFormatError, ValueError, OSError, RuntimeError) as exc:
        print(f"gridloc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
