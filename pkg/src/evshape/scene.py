"""Scene-directory layout: dataset generation and artifact loading.

A scene directory is self-describing: config snapshot, ground-truth mesh and
trajectory, intensity/mask images, the event stream, binned event-frame
images, and a manifest with a SHA-256 per artifact. Sub-seeds are fixed
offsets from the scene seed so every stage is independently reproducible.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import eventframes, eventsim, geometry, render
from .camera import Trajectory, generate_trajectory, load_trajectory, save_trajectory
from .config import PipelineConfig, config_to_ini
from .errors import MissingArtifactError
from .eventsim import EventStream
from .geometry import TriangleMesh, make_icosphere

# Stage sub-seeds, offset from the scene seed.
SEED_TRAJECTORY = 1
SEED_ALBEDO = 2
SEED_EVENTS = 3
SEED_OFFCENTER = 4
SEED_BLOB = 5

CONFIG_NAME = "config.ini"
MANIFEST_NAME = "manifest.json"
MESH_NAME = "mesh_gt.obj"
TRAJECTORY_NAME = "trajectory.txt"
EVENTS_NAME = "events.evt"
FRAMES_DIR = "frames"
MASKS_DIR = "masks"
EVENTFRAMES_DIR = "eventframes"
EXTRACTED_DIR = "extracted"


def make_cube(half_extent: float) -> TriangleMesh:
    v = np.array(
        [
            [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
            [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
        ],
        dtype=np.float64,
    ) * half_extent
    f = np.array(
        [
            [0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7],
            [0, 1, 5], [0, 5, 4], [3, 6, 2], [3, 7, 6],
            [0, 4, 7], [0, 7, 3], [1, 6, 5], [1, 2, 6],
        ],
        dtype=np.int32,
    )
    return TriangleMesh(v, f)


def make_blob(radius: float, bumps: int, amplitude: float, seed: int) -> TriangleMesh:
    """Icosphere with seeded low-frequency radial bumps; smooth, genus 0."""
    base = make_icosphere(3, 1.0)
    rng = np.random.Generator(np.random.PCG64(seed))
    dirs = rng.normal(size=(bumps, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    coeffs = rng.uniform(-amplitude, amplitude, bumps)
    unit = base.vertices / np.linalg.norm(base.vertices, axis=1, keepdims=True)
    angles = np.arccos(np.clip(unit @ dirs.T, -1.0, 1.0))  # (V, bumps)
    factor = 1.0 + (coeffs * np.exp(-((angles / 0.8) ** 2))).sum(axis=1)
    factor = np.maximum(factor, 0.3)
    return TriangleMesh(unit * (radius * factor)[:, None], base.faces)


def build_object(cfg: PipelineConfig) -> TriangleMesh:
    name = cfg.scene.object
    if name == "sphere":
        return make_icosphere(3, cfg.scene.radius)
    if name == "cube":
        return make_cube(cfg.scene.radius)
    if name == "blob":
        return make_blob(
            cfg.scene.radius, cfg.scene.blob_bumps, cfg.scene.blob_amplitude,
            cfg.scene.seed + SEED_BLOB,
        )
    path = Path(name)
    if not path.exists():
        raise MissingArtifactError(f"input mesh not found: {name}")
    return geometry.load_obj(path)


def build_background(cfg: PipelineConfig) -> render.IntensityFrame:
    K = cfg.camera.intrinsics()
    if cfg.render.background == "checker":
        return render.checkerboard_background(
            K, cfg.render.checker_tile, cfg.render.checker_lo, cfg.render.checker_hi
        )
    path = Path(cfg.render.background)
    if not path.exists():
        raise MissingArtifactError(f"background image not found: {path}")
    from . import imgio

    data, maxval = imgio.read_pgm(path)
    return render.background_from_image(data, maxval, K)


def _quantize16(frame: render.IntensityFrame) -> render.IntensityFrame:
    # Match the on-disk 16-bit PGM exactly so re-simulation from files is
    # byte-identical to the in-memory pipeline.
    q = np.rint(frame.pixels * 65535.0) / 65535.0
    return render.IntensityFrame(q, frame.t_us)


def auto_bin_count(n_events: int, n_views: int) -> int:
    return max(1, n_events // n_views)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def generate_scene(cfg: PipelineConfig, out_dir) -> dict:
    """Render, simulate, and bin a full synthetic scene; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for sub in (FRAMES_DIR, MASKS_DIR, EVENTFRAMES_DIR):
        (out / sub).mkdir(exist_ok=True)

    seed = cfg.scene.seed
    mesh = build_object(cfg)
    offset = np.zeros(3)
    if cfg.scene.offcenter > 0:
        rng = np.random.Generator(np.random.PCG64(seed + SEED_OFFCENTER))
        offset = rng.uniform(-cfg.scene.offcenter, cfg.scene.offcenter, 3)
    mesh = TriangleMesh(mesh.vertices + offset, mesh.faces)
    geometry.save_obj(mesh, out / MESH_NAME)

    trajectory = generate_trajectory(
        cfg.camera.n_views,
        cfg.camera.base_distance,
        cfg.camera.base_elevation,
        cfg.camera.augmentation(),
        seed=seed + SEED_TRAJECTORY,
        target=offset,
        frame_dt_us=cfg.camera.frame_dt_us,
    )
    save_trajectory(trajectory, out / TRAJECTORY_NAME)

    K = cfg.camera.intrinsics()
    shading = render.ShadingConfig(
        albedo=render.random_face_albedo(
            mesh.n_faces, seed + SEED_ALBEDO, cfg.render.albedo_lo, cfg.render.albedo_hi
        ),
        background=build_background(cfg),
        light_dir=cfg.render.light,
    )
    sequence = render.render_sequence(mesh, trajectory, K, shading)

    frames = []
    for i, (frame, mask, _pose) in enumerate(sequence):
        q = _quantize16(frame)
        frames.append(q)
        render.save_intensity_pgm(out / FRAMES_DIR / f"intensity_{i:03d}.pgm", q)
        render.save_mask_pgm(out / MASKS_DIR / f"mask_{i:03d}.pgm", mask)

    stream = eventsim.simulate_events(frames, cfg.events.sim_config(seed + SEED_EVENTS))
    eventsim.write_events(stream, out / EVENTS_NAME)

    count = cfg.binning.count or auto_bin_count(len(stream), cfg.camera.n_views)
    bins = eventframes.bin_events(stream, count)
    if cfg.binning.denoise_min_count > 0:
        bins = [eventframes.denoise_frame(b, cfg.binning.denoise_min_count) for b in bins]
    for i, b in enumerate(bins):
        eventframes.save_frame_ppm(out / EVENTFRAMES_DIR / f"frame_{i:03d}.ppm", b)

    (out / CONFIG_NAME).write_text(config_to_ini(cfg))

    artifacts = sorted(
        str(p.relative_to(out)) for p in out.rglob("*") if p.is_file() and p.name != MANIFEST_NAME
    )
    manifest = {
        "seed": seed,
        "n_events": len(stream),
        "bin_count": count,
        "config": config_to_ini(cfg),
        "artifacts": {rel: sha256_file(out / rel) for rel in artifacts},
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def _require(scene_dir: Path, name: str) -> Path:
    p = scene_dir / name
    if not p.exists():
        raise MissingArtifactError(f"scene is missing {name} (looked in {scene_dir})")
    return p


def load_scene_config(scene_dir) -> PipelineConfig:
    from .config import load_config

    return load_config(_require(Path(scene_dir), CONFIG_NAME))


def load_scene_trajectory(scene_dir) -> Trajectory:
    return load_trajectory(_require(Path(scene_dir), TRAJECTORY_NAME))


def load_scene_masks(scene_dir) -> list[render.SilhouetteMask]:
    scene_dir = Path(scene_dir)
    _require(scene_dir, MASKS_DIR)
    paths = sorted((scene_dir / MASKS_DIR).glob("mask_*.pgm"))
    if not paths:
        raise MissingArtifactError(f"scene has no masks in {MASKS_DIR}/")
    return [render.load_mask_pgm(p) for p in paths]


def load_scene_frames(scene_dir) -> list[render.IntensityFrame]:
    scene_dir = Path(scene_dir)
    _require(scene_dir, FRAMES_DIR)
    paths = sorted((scene_dir / FRAMES_DIR).glob("intensity_*.pgm"))
    if not paths:
        raise MissingArtifactError(f"scene has no frames in {FRAMES_DIR}/")
    trajectory = load_scene_trajectory(scene_dir)
    if len(paths) != len(trajectory):
        raise MissingArtifactError("frame count does not match trajectory length")
    return [render.load_intensity_pgm(p, int(t)) for p, t in zip(paths, trajectory.t_us)]


def load_scene_events(scene_dir) -> EventStream:
    return eventsim.read_events(_require(Path(scene_dir), EVENTS_NAME))


def load_scene_gt_mesh(scene_dir) -> TriangleMesh | None:
    p = Path(scene_dir) / MESH_NAME
    return geometry.load_obj(p) if p.exists() else None
