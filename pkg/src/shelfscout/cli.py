"""Command line interface.

Subcommands:
    run              one seeded scene through the pipeline, verbose trace
    sweep            a batch of scenes, CSV/JSON report
    export-pushmaps  machine-labeled push-map dataset for one scene
    render           map / depth / scene snapshots as PGM / PPM

``sweep`` exits 0 even when individual scenes fail; failures are recorded
in the report's error column.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bench import PipelineParams, run_pipeline, sweep
from .episode import Episode, RewardParams, TerminationCriteria
from .mapping import MapParams, write_map_snapshots
from .planning import PlannerKind
from .push import PushSamplingConfig, export_pushmaps
from .scene import SceneState, ShelfSpec, sample_scene
from .sensor import CameraIntrinsics, survey_poses, render_depth, write_depth_pgm
from .pgmio import write_ppm

_PLANNERS = {k.value: k for k in PlannerKind}


def _add_common_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--planner", choices=sorted(_PLANNERS), default="greedy")
    p.add_argument("--n-candidates", type=int, default=64, help="candidate poses per planning step (pool size for global)")
    p.add_argument("--push-length", type=float, default=0.05, metavar="M")
    p.add_argument("--score-length", type=float, default=None, help="score candidates at this length (length-blind selection); default: the executed length")
    p.add_argument("--no-push", action="store_true", help="planner-only run, no push actions")
    p.add_argument("--push-selection", choices=["scored", "random"], default="scored")
    p.add_argument("--push-gain-cutoff", type=float, default=0.01)
    p.add_argument("--max-iterations", type=int, default=8)
    p.add_argument("--steps-budget", type=int, default=5, help="fixed steps per planning phase; 0 runs each phase to entropy-window termination")
    p.add_argument("--displacement-weight", type=float, default=0.5)
    p.add_argument("--drop-penalty", type=float, default=1.0)
    p.add_argument("--min-objects", type=int, default=8)
    p.add_argument("--max-objects", type=int, default=10)
    p.add_argument("--scene-json", type=str, default=None, help="replay a serialized scene instead of sampling")
    # shelf and camera
    p.add_argument("--shelf-depth", type=float, default=0.40)
    p.add_argument("--shelf-width", type=float, default=0.80)
    p.add_argument("--shelf-height", type=float, default=0.40)
    p.add_argument("--wall-thickness", type=float, default=0.02)
    p.add_argument("--image-width", type=int, default=160)
    p.add_argument("--image-height", type=int, default=120)
    # map parameters
    p.add_argument("--cell-size", type=float, default=0.01)
    p.add_argument("--unknown-margin", type=float, default=0.2)
    p.add_argument("--log-odds-hit", type=float, default=0.85)
    p.add_argument("--log-odds-miss", type=float, default=-0.4)
    p.add_argument("--log-odds-clamp", type=float, default=3.5)
    p.add_argument("--occupied-height", type=float, default=0.015)
    # reward / termination
    p.add_argument("--cost-weight", type=float, default=1.0)
    p.add_argument("--gain-weight", type=float, default=10.0)
    p.add_argument("--collision-penalty", type=float, default=-25.0)
    p.add_argument("--single-change-max", type=float, default=0.01)
    p.add_argument("--total-change-max", type=float, default=0.05)


def _params_from_args(args) -> PipelineParams:
    return PipelineParams(
        planner=_PLANNERS[args.planner],
        n_candidates=args.n_candidates,
        push_selection="none" if args.no_push else args.push_selection,
        push_length=args.push_length,
        score_length=args.score_length,
        displacement_weight=args.displacement_weight,
        drop_penalty=args.drop_penalty,
        push_gain_cutoff=args.push_gain_cutoff,
        max_iterations=args.max_iterations,
        steps_budget=args.steps_budget if args.steps_budget else None,
        n_objects=(args.min_objects, args.max_objects),
        shelf=ShelfSpec(
            depth_m=args.shelf_depth,
            width_m=args.shelf_width,
            height_m=args.shelf_height,
            wall_thickness_m=args.wall_thickness,
        ),
        intr=CameraIntrinsics(width=args.image_width, height=args.image_height),
        map_params=MapParams(
            cell_size=args.cell_size,
            unknown_margin=args.unknown_margin,
            log_odds_hit=args.log_odds_hit,
            log_odds_miss=args.log_odds_miss,
            log_odds_clamp=args.log_odds_clamp,
            occupied_height=args.occupied_height,
        ),
        reward=RewardParams(
            cost_weight=args.cost_weight,
            gain_weight=args.gain_weight,
            collision_penalty=args.collision_penalty,
        ),
        termination=TerminationCriteria(
            single_change_max=args.single_change_max,
            total_change_max=args.total_change_max,
        ),
        scene_file=args.scene_json,
    )


def _cmd_run(args) -> int:
    params = _params_from_args(args)
    result = run_pipeline(args.seed, params)
    row = result.row
    for rec in result.trace.records:
        if rec["kind"] == "view":
            print(
                f"view  h {rec['entropy_before']:.4f} -> {rec['entropy_after']:.4f}"
                f"  gain {rec['info_gain']:+.4f}  cost {rec['motion_cost']:.3f}  reward {rec['reward']:+.3f}"
            )
        elif rec["kind"] == "push":
            print(
                f"push  dir {rec['direction_index']}  len {rec['length']:.2f}"
                f"  moved {sum(1 for v in rec['displacements'].values() if v > 0)}  drops {len(rec['drops'])}"
            )
    print(
        f"seed {row.seed}: entropy {row.entropy_bootstrap:.4f} -> {row.entropy_final:.4f}"
        f"  ({row.reduction_vs_bootstrap * 100:.1f}% vs bootstrap, {row.reduction_vs_planning * 100:.1f}% vs planning)"
        f"  displacement {row.mean_displacement_cm:.2f} cm  drops {row.drops}  iterations {row.iterations}"
    )
    if args.trace:
        result.trace.save(args.trace)
        print(f"trace written to {args.trace}")
    return 0


def _cmd_sweep(args) -> int:
    params = _params_from_args(args)
    seeds = range(args.seed, args.seed + args.scenes)
    report = sweep(seeds, params, workers=args.workers)
    agg = report.aggregate()
    if args.out:
        report.save_csv(args.out)
        print(f"csv written to {args.out}")
    if args.json:
        report.save_json(args.json)
        print(f"json written to {args.json}")
    red = agg.get("reduction_vs_bootstrap", {})
    print(
        f"{agg['scenes']} scenes ({agg['errors']} errors), planner {params.planner.value}, "
        f"push {params.push_selection}: reduction vs bootstrap "
        f"{red.get('mean', float('nan')) * 100:.1f}% +- {red.get('stderr', float('nan')) * 100:.1f}%"
    )
    return 0


def _cmd_export_pushmaps(args) -> int:
    params = _params_from_args(args)
    if args.scene_json:
        scene = SceneState.load(args.scene_json)
    else:
        rng = np.random.default_rng(args.seed)
        n = int(rng.integers(args.min_objects, args.max_objects + 1))
        scene = sample_scene(args.seed, n, params.shelf)
    episode = Episode(scene, intr=params.intr, map_params=params.map_params)
    episode.reset()
    count = export_pushmaps(
        scene,
        episode.map,
        args.out_dir,
        PushSamplingConfig(),
        length=args.push_length,
        displacement_weight=args.displacement_weight,
        intr=params.intr,
    )
    print(f"{count} push maps written to {args.out_dir}")
    return 0


def _cmd_render(args) -> int:
    params = _params_from_args(args)
    if args.scene_json:
        scene = SceneState.load(args.scene_json)
    else:
        rng = np.random.default_rng(args.seed)
        n = int(rng.integers(args.min_objects, args.max_objects + 1))
        scene = sample_scene(args.seed, n, params.shelf)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    episode = Episode(scene, intr=params.intr, map_params=params.map_params)
    episode.reset()
    files = write_map_snapshots(episode.map, out / "map")
    center = survey_poses(scene.shelf)[0]
    depth = render_depth(scene, center, params.intr)
    write_depth_pgm(depth, out / "depth_center.pgm")
    files.append(str(out / "depth_center.pgm"))
    write_ppm(out / "scene_topdown.ppm", _scene_topdown(scene))
    files.append(str(out / "scene_topdown.ppm"))
    (out / "scene.json").write_text(scene.to_json())
    files.append(str(out / "scene.json"))
    print("\n".join(files))
    return 0


def _scene_topdown(scene: SceneState, px_per_cell: int = 4) -> np.ndarray:
    """Rasterize the ground-truth footprints into a small color image."""
    cell = 0.01
    nx = round(scene.shelf.depth_m / cell) * px_per_cell
    ny = round(scene.shelf.width_m / cell) * px_per_cell
    img = np.full((nx, ny, 3), 230, dtype=np.uint8)
    xs = (np.arange(nx) + 0.5) * (scene.shelf.depth_m / nx)
    ys = (np.arange(ny) + 0.5) * (scene.shelf.width_m / ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    palette = np.array(
        [[214, 69, 65], [63, 127, 191], [77, 175, 74], [255, 170, 0], [152, 78, 163], [0, 158, 155]],
        dtype=np.uint8,
    )
    for obj in scene.objects:
        fp = obj.footprint()
        mask = np.zeros((nx, ny), dtype=bool)
        flat = mask.reshape(-1)
        for k, (x, y) in enumerate(zip(gx.ravel(), gy.ravel())):
            flat[k] = fp.contains(x, y)
        img[mask] = palette[obj.id % len(palette)]
    return img


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shelfscout", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single seeded pipeline run with verbose trace")
    _add_common_params(p_run)
    p_run.add_argument("--trace", type=str, default=None, help="write the episode trace as JSON lines")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="batch of scenes with CSV/JSON report")
    _add_common_params(p_sweep)
    p_sweep.add_argument("--scenes", type=int, default=100, metavar="N")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--out", type=str, default=None, help="CSV report path")
    p_sweep.add_argument("--json", type=str, default=None, help="JSON report path")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_export = sub.add_parser("export-pushmaps", help="write a labeled push-map dataset")
    _add_common_params(p_export)
    p_export.add_argument("--out-dir", type=str, required=True)
    p_export.set_defaults(func=_cmd_export_pushmaps)

    p_render = sub.add_parser("render", help="write map/scene/depth snapshots")
    _add_common_params(p_render)
    p_render.add_argument("--out-dir", type=str, required=True)
    p_render.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
