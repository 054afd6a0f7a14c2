"""Template-sphere deformation against multi-view silhouette losses.

Each iteration samples a small random subset of reference views, evaluates
the weighted objective, and applies a bias-corrected adaptive first-order
update to all vertex coordinates. Vertex positions are the only optimized
parameters; topology never changes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraPose, Intrinsics, look_at
from .diffrender import SoftRenderConfig
from .errors import NumericError
from .geometry import TriangleMesh, make_icosphere
from .losses import LossWeights, mesh_objective
from .render import SilhouetteMask


@dataclass(frozen=True)
class OptimConfig:
    """First-order optimizer settings for the reconstruction loop."""

    iterations: int = 2000
    lr: float = 5e-3
    betas: tuple[float, float] = (0.9, 0.99)
    eps: float = 1e-8
    views_per_iter: int = 2
    seed: int = 0
    template_subdivisions: int = 3
    init_radius: float | None = None  # None: 0.7 × silhouette-derived estimate
    weights: LossWeights = field(default_factory=LossWeights)
    render: SoftRenderConfig = field(default_factory=SoftRenderConfig)

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not all(0.0 <= b < 1.0 for b in self.betas):
            raise ValueError("moment decays must lie in [0, 1)")
        if self.views_per_iter < 1:
            raise ValueError("views_per_iter must be >= 1")


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators and the step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, shape) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), 0)


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.99),
    eps: float = 1e-8,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected adaptive moment update; returns new arrays."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("params/grads/state shapes must match")
    b1, b2 = betas
    t = state.t + 1
    m = b1 * state.m + (1.0 - b1) * grads
    v = b2 * state.v + (1.0 - b2) * grads * grads
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v, t)


def estimate_initial_radius(
    views: list[tuple[SilhouetteMask, CameraPose]], K: Intrinsics
) -> float:
    """0.7 × mean equivalent-disk world radius of the silhouettes.

    Falls back to 0.7 m when every mask is empty.
    """
    radii = []
    for mask, pose in views:
        area = mask.area()
        if area <= 0:
            continue
        r_px = np.sqrt(area / np.pi)
        dist = float(np.linalg.norm(pose.camera_center()))
        radii.append(r_px * dist / K.focal)
    if not radii:
        return 0.7
    return 0.7 * float(np.mean(radii))


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    total: float
    iou: float
    lap: float
    smooth: float


def reconstruct(
    views: list[tuple[SilhouetteMask, CameraPose]],
    K: Intrinsics,
    cfg: OptimConfig = OptimConfig(),
) -> tuple[TriangleMesh, list[TraceRow]]:
    """Deform a template icosphere to match the given silhouettes.

    Deterministic for a fixed config seed; raises NumericError if any loss or
    vertex goes non-finite.
    """
    if len(views) < 2:
        raise ValueError(f"reconstruction needs >= 2 views, got {len(views)}")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    radius = cfg.init_radius if cfg.init_radius is not None else estimate_initial_radius(views, K)
    template = make_icosphere(cfg.template_subdivisions, radius)
    verts = template.vertices.copy()
    state = AdamState.zeros(verts.shape)
    trace: list[TraceRow] = []
    n_views = len(views)
    k = min(cfg.views_per_iter, n_views)

    mesh = template
    for it in range(cfg.iterations):
        chosen = rng.choice(n_views, size=k, replace=False)
        batch = [views[int(i)] for i in chosen]
        res = mesh_objective(mesh, batch, K, cfg.render, cfg.weights)
        if not (np.isfinite(res.total) and np.all(np.isfinite(res.grad))):
            raise NumericError(f"non-finite objective at iteration {it}")
        verts, state = adam_step(verts, res.grad, state, cfg.lr, cfg.betas, cfg.eps)
        if not np.all(np.isfinite(verts)):
            raise NumericError(f"non-finite vertex at iteration {it}")
        mesh = mesh.with_vertices(verts)
        trace.append(TraceRow(it, res.total, res.iou, res.lap, res.smooth))
    return mesh, trace


def pose_for_reconstruction(mode: str, poses: list[CameraPose]) -> list[CameraPose]:
    """`gt` passes poses through; `trans_only` keeps each camera center and
    re-derives the orientation by aiming at the origin."""
    if mode == "gt":
        return list(poses)
    if mode != "trans_only":
        raise ValueError(f"unknown pose mode {mode!r}")
    out = []
    for pose in poses:
        center = pose.camera_center()
        if np.linalg.norm(center) < 1e-12:
            raise ValueError("camera at the origin cannot aim at the origin")
        out.append(look_at(center, (0.0, 0.0, 0.0)))
    return out


def write_loss_trace(path, trace: list[TraceRow]) -> None:
    """CSV: iter,loss_total,loss_iou,loss_lap,loss_smooth."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "loss_total", "loss_iou", "loss_lap", "loss_smooth"])
        for row in trace:
            writer.writerow([row.iteration, repr(row.total), repr(row.iou), repr(row.lap), repr(row.smooth)])
