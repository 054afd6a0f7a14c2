"""Evaluation metrics: mean silhouette IoU, mesh reprojection IoU, chamfer
distance, and pose translation/rotation errors.

Negative IoU convention throughout: 0 is perfect, lower is better.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .camera import CameraPose, Intrinsics
from .geometry import PointCloud, TriangleMesh, sample_surface
from .losses import loss_iou
from .render import SilhouetteMask, rasterize_silhouette

_CHUNK = 512  # rows per brute-force distance block


def mean_iou(pairs: list[tuple[SilhouetteMask, SilhouetteMask]]) -> float:
    """Mean negative IoU over (reference, prediction) mask pairs."""
    if not pairs:
        raise ValueError("mean_iou needs at least one pair")
    return float(np.mean([loss_iou(a, b)[0] for a, b in pairs]))


def mesh_reprojection_iou(
    mesh: TriangleMesh,
    views: list[tuple[SilhouetteMask, CameraPose]],
    K: Intrinsics,
) -> float:
    """Mean negative IoU of the hard-rasterized mesh against reference masks."""
    if not views:
        raise ValueError("reprojection IoU needs at least one view")
    vals = [loss_iou(gt, rasterize_silhouette(mesh, pose, K))[0] for gt, pose in views]
    return float(np.mean(vals))


def _min_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-point distance from each of a to its nearest neighbor in b.

    Chunked O(n·m) brute force; sqrt is applied after the min so results match
    a per-pair loop bit-for-bit (sqrt is monotone and correctly rounded).
    """
    out = np.empty(len(a))
    for lo in range(0, len(a), _CHUNK):
        block = a[lo : lo + _CHUNK]
        d2 = ((block[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        out[lo : lo + _CHUNK] = np.sqrt(d2.min(axis=1))
    return out


def chamfer(a: PointCloud, b: PointCloud, squared: bool = False) -> float:
    """Symmetric mean nearest-neighbor distance in meters (unsquared default)."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("chamfer needs non-empty clouds")
    da = _min_dists(a.points, b.points)
    db = _min_dists(b.points, a.points)
    if squared:
        da, db = da * da, db * db
    return 0.5 * (float(np.mean(da)) + float(np.mean(db)))


def chamfer_between_meshes(
    mesh_a: TriangleMesh, mesh_b: TriangleMesh, n_samples: int = 10_000, seed: int = 0
) -> float:
    """Chamfer between fixed-seed surface samplings of two meshes.

    Both meshes use the same seed, so a mesh compared against itself scores
    exactly zero rather than the independent-sampling noise floor.
    """
    return chamfer(sample_surface(mesh_a, n_samples, seed), sample_surface(mesh_b, n_samples, seed))


def pose_errors(p: CameraPose, p_hat: CameraPose) -> tuple[float, float]:
    """(translation error in meters, rotation error in degrees).

    Rotation error is the minimum aligning angle 2·acos(|q·q̂|)·180/π.
    """
    t_err = float(np.linalg.norm(p.t - p_hat.t))
    dot = min(abs(float(np.dot(p.q, p_hat.q))), 1.0)
    rot_err = 2.0 * math.acos(dot) * 180.0 / math.pi
    return t_err, rot_err


def median_over_set(values) -> float:
    """Lower median: element at index (n−1)//2 of the sorted values."""
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        raise ValueError("median of empty set")
    return float(arr[(arr.size - 1) // 2])


def pose_threshold_accuracy(
    pairs: list[tuple[CameraPose, CameraPose]],
    t_max: float = 1.0,
    rot_max_deg: float = 45.0,
) -> float:
    """Fraction of pose pairs within both error thresholds."""
    if not pairs:
        raise ValueError("accuracy needs at least one pair")
    hits = 0
    for p, p_hat in pairs:
        t_err, r_err = pose_errors(p, p_hat)
        hits += int(t_err < t_max and r_err < rot_max_deg)
    return hits / len(pairs)


def write_metrics_report(report: dict, txt_path, json_path) -> None:
    """Flat `key = value` text plus a sorted JSON twin."""
    lines = [f"{k} = {report[k]}" for k in sorted(report)]
    Path(txt_path).write_text("\n".join(lines) + "\n")
    Path(json_path).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")


def read_metrics_report(json_path) -> dict:
    return json.loads(Path(json_path).read_text())
