"""Command-line pipeline: dataset, simulate, bin, extract, reconstruct,
carve, evaluate.

Exit codes: 0 success, 2 bad arguments, 3 missing artifact, 4 numeric
failure. Every command is reproducible from config + seed and never mutates
its inputs.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import eventframes, eventsim, geometry, hull, metrics, scene, silext
from .config import PipelineConfig, load_config
from .errors import FormatError, MissingArtifactError, NumericError
from .meshopt import pose_for_reconstruction, reconstruct, write_loss_trace
from .scene import (
    EVENTFRAMES_DIR,
    EVENTS_NAME,
    EXTRACTED_DIR,
    SEED_EVENTS,
    auto_bin_count,
    load_scene_config,
    load_scene_events,
    load_scene_frames,
    load_scene_gt_mesh,
    load_scene_masks,
    load_scene_trajectory,
)


def _resolve_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    if getattr(args, "seed", None) is not None:
        sec = {f: getattr(cfg.scene, f) for f in cfg.scene.__dataclass_fields__}
        sec["seed"] = args.seed
        cfg = PipelineConfig(**{**{s: getattr(cfg, s) for s in cfg.__dataclass_fields__}, "scene": type(cfg.scene)(**sec)})
    return cfg


def _check_writable(path: Path) -> None:
    parent = path.parent if path.parent != Path("") else Path(".")
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise MissingArtifactError(f"output location not writable: {path}")


def cmd_dataset(args) -> int:
    cfg = _resolve_config(args)
    manifest = scene.generate_scene(cfg, args.out)
    print(f"wrote scene to {args.out}: {len(manifest['artifacts'])} artifacts, "
          f"{manifest['n_events']} events, bin count {manifest['bin_count']}")
    return 0


def cmd_simulate(args) -> int:
    scene_dir = Path(args.scene)
    cfg = load_scene_config(scene_dir)
    frames = load_scene_frames(scene_dir)
    stream = eventsim.simulate_events(frames, cfg.events.sim_config(cfg.scene.seed + SEED_EVENTS))
    out = Path(args.out) if args.out else scene_dir / EVENTS_NAME
    _check_writable(out)
    eventsim.write_events(stream, out)
    print(f"simulated {len(stream)} events -> {out}")
    return 0


def _binned_frames(scene_dir: Path, cfg: PipelineConfig):
    stream = load_scene_events(scene_dir)
    count = cfg.binning.count or auto_bin_count(len(stream), cfg.camera.n_views)
    bins = eventframes.bin_events(stream, count)
    if cfg.binning.denoise_min_count > 0:
        bins = [eventframes.denoise_frame(b, cfg.binning.denoise_min_count) for b in bins]
    return bins


def cmd_bin(args) -> int:
    scene_dir = Path(args.scene)
    cfg = load_scene_config(scene_dir)
    bins = _binned_frames(scene_dir, cfg)
    out = Path(args.out) if args.out else scene_dir / EVENTFRAMES_DIR
    out.mkdir(parents=True, exist_ok=True)
    for i, b in enumerate(bins):
        eventframes.save_frame_ppm(out / f"frame_{i:03d}.ppm", b)
    print(f"binned {len(bins)} event frames -> {out}")
    return 0


def cmd_extract(args) -> int:
    scene_dir = Path(args.scene)
    cfg = load_scene_config(scene_dir)
    bins = _binned_frames(scene_dir, cfg)
    trajectory = load_scene_trajectory(scene_dir)
    paired = eventframes.assign_poses(bins, trajectory)
    out = Path(args.out) if args.out else scene_dir / EXTRACTED_DIR
    out.mkdir(parents=True, exist_ok=True)
    from .render import save_mask_pgm

    params = cfg.extract.params()
    for i, (frame, _pose) in enumerate(paired):
        save_mask_pgm(out / f"mask_{i:03d}.pgm", silext.extract_silhouette(frame, params))
    print(f"extracted {len(paired)} silhouettes -> {out}")
    return 0


def _gather_views(scene_dir: Path, cfg: PipelineConfig, source: str):
    trajectory = load_scene_trajectory(scene_dir)
    if source == "oracle":
        masks = load_scene_masks(scene_dir)
        if len(masks) != len(trajectory):
            raise MissingArtifactError("mask count does not match trajectory length")
        return silext.silhouette_source("oracle", gt_masks=masks, gt_poses=list(trajectory.poses))
    bins = _binned_frames(scene_dir, cfg)
    paired = eventframes.assign_poses(bins, trajectory)
    return silext.silhouette_source(
        "extracted",
        event_frames=[f for f, _ in paired],
        frame_poses=[p for _, p in paired],
        params=cfg.extract.params(),
    )


def cmd_reconstruct(args) -> int:
    scene_dir = Path(args.scene)
    cfg = load_scene_config(scene_dir)
    out_obj = Path(args.out)
    _check_writable(out_obj)
    views = _gather_views(scene_dir, cfg, args.source)
    poses = pose_for_reconstruction(args.pose_mode, [p for _, p in views])
    views = [(m, p) for (m, _), p in zip(views, poses)]
    K = cfg.camera.intrinsics()
    seed = cfg.scene.seed if args.seed is None else args.seed
    mesh, trace = reconstruct(views, K, cfg.optim.optim_config(seed))
    geometry.save_obj(mesh, out_obj)
    write_loss_trace(out_obj.with_suffix(".trace.csv"), trace)

    gt_masks = load_scene_masks(scene_dir)
    trajectory = load_scene_trajectory(scene_dir)
    report = {
        "source": args.source,
        "pose_mode": args.pose_mode,
        "n_views": len(views),
        "iterations": len(trace),
        "final_loss_total": trace[-1].total if trace else None,
        "reprojection_iou_loss": metrics.mesh_reprojection_iou(
            mesh, list(zip(gt_masks, trajectory.poses)), K
        ),
    }
    gt_mesh = load_scene_gt_mesh(scene_dir)
    if gt_mesh is not None:
        report["chamfer_m"] = metrics.chamfer_between_meshes(mesh, gt_mesh)
    else:
        report["chamfer_note"] = "ground-truth mesh missing; chamfer omitted"
    metrics.write_metrics_report(
        report, out_obj.with_suffix(".metrics.txt"), out_obj.with_suffix(".metrics.json")
    )
    print(f"reconstructed {mesh.n_vertices} vertices -> {out_obj}")
    print(f"reprojection IoU loss: {report['reprojection_iou_loss']:.4f}")
    return 0


def cmd_carve(args) -> int:
    scene_dir = Path(args.scene)
    cfg = load_scene_config(scene_dir)
    out_obj = Path(args.out)
    _check_writable(out_obj)
    views = _gather_views(scene_dir, cfg, args.source)
    gt_mesh = load_scene_gt_mesh(scene_dir)
    if gt_mesh is not None:
        lo = gt_mesh.vertices.min(axis=0)
        hi = gt_mesh.vertices.max(axis=0)
        # 10% margin: wide enough for hull bulges, tight enough that even a
        # 2-voxel grid keeps its cell centers inside a round object
        center, half = (lo + hi) / 2, (hi - lo).max() * 0.55 + 1e-6
    else:
        center, half = np.zeros(3), cfg.scene.radius * 1.1
    spec = hull.GridSpec(
        (args.res,) * 3, tuple(center - half), tuple(center + half)
    )
    grid = hull.carve(views, cfg.camera.intrinsics(), spec)
    print(f"occupied voxels: {int(grid.occupancy.sum())} / {grid.occupancy.size}")
    mesh = hull.grid_to_mesh(grid)
    geometry.save_obj(mesh, out_obj)
    print(f"hull mesh: {mesh.n_vertices} vertices -> {out_obj}")
    return 0


def cmd_evaluate(args) -> int:
    scene_dir = Path(args.scene)
    cfg = load_scene_config(scene_dir)
    pred = geometry.load_obj(args.mesh)
    gt_masks = load_scene_masks(scene_dir)
    trajectory = load_scene_trajectory(scene_dir)
    K = cfg.camera.intrinsics()
    report = {
        "mesh": str(args.mesh),
        "n_views": len(gt_masks),
        "reprojection_iou_loss": metrics.mesh_reprojection_iou(
            pred, list(zip(gt_masks, trajectory.poses)), K
        ),
        "n_vertices": pred.n_vertices,
        "n_faces": pred.n_faces,
    }
    gt_mesh = load_scene_gt_mesh(scene_dir)
    if gt_mesh is not None:
        report["chamfer_m"] = metrics.chamfer_between_meshes(pred, gt_mesh)
    else:
        report["chamfer_note"] = "ground-truth mesh missing; chamfer omitted"
        print("note: ground-truth mesh missing; chamfer omitted", file=sys.stderr)
    base = Path(args.out) if args.out else Path(args.mesh)
    metrics.write_metrics_report(report, base.with_suffix(".metrics.txt"), base.with_suffix(".metrics.json"))
    for k in sorted(report):
        print(f"{k} = {report[k]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evshape",
        description="Silhouette-based mesh reconstruction from simulated event-camera orbits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="generate a synthetic scene directory")
    p.add_argument("--out", required=True, help="scene output directory")
    p.add_argument("--config", help="INI config overlay")
    p.add_argument("--seed", type=int, help="override the scene seed")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("simulate", help="re-simulate events from scene frames")
    p.add_argument("scene")
    p.add_argument("--out", help="output events file (default: scene/events.evt)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bin", help="bin the event stream into event frames")
    p.add_argument("scene")
    p.add_argument("--out", help="output directory (default: scene/eventframes)")
    p.set_defaults(func=cmd_bin)

    p = sub.add_parser("extract", help="extract silhouettes from event frames")
    p.add_argument("scene")
    p.add_argument("--out", help="output directory (default: scene/extracted)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("reconstruct", help="optimize a mesh against scene silhouettes")
    p.add_argument("scene")
    p.add_argument("--source", choices=["oracle", "extracted"], default="oracle")
    p.add_argument("--pose-mode", choices=["gt", "trans_only"], default="gt")
    p.add_argument("--seed", type=int, help="override the optimizer seed")
    p.add_argument("--out", required=True, help="output OBJ path")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("carve", help="visual-hull voxel carving baseline")
    p.add_argument("scene")
    p.add_argument("--source", choices=["oracle", "extracted"], default="oracle")
    p.add_argument("--res", type=int, default=64, help="voxels per axis")
    p.add_argument("--out", required=True, help="output OBJ path")
    p.set_defaults(func=cmd_carve)

    p = sub.add_parser("evaluate", help="score a predicted mesh against scene ground truth")
    p.add_argument("mesh", help="predicted OBJ")
    p.add_argument("scene")
    p.add_argument("--out", help="report base path (default: next to the mesh)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ValueError) else 3
    except (MissingArtifactError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
