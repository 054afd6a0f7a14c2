"""Classical silhouette extraction from event frames.

Replaces a learned segmentation stage with morphology: binarize event support,
dilate to close contour gaps, fill from the border, erode back, keep the
largest component. Only claimed for clean (static-background) scenes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .camera import CameraPose
from .eventframes import EventFrame
from .render import SilhouetteMask


@dataclass(frozen=True)
class ExtractParams:
    """dilate_radius closes 1-2 px contour gaps at 280² scale; components
    smaller than min_component px² are treated as noise."""

    dilate_radius: int = 3
    min_component: int = 100

    def __post_init__(self):
        if self.dilate_radius < 0 or self.min_component < 0:
            raise ValueError("extraction parameters must be non-negative")


def _disk(radius: int) -> np.ndarray:
    if radius == 0:
        return np.ones((1, 1), dtype=bool)
    span = np.arange(-radius, radius + 1)
    xx, yy = np.meshgrid(span, span)
    return xx * xx + yy * yy <= radius * radius


def extract_silhouette(frame: EventFrame, params: ExtractParams = ExtractParams()) -> SilhouetteMask:
    """Binary mask of the filled event contour, or empty if nothing plausible."""
    support = frame.combined() >= 1
    if not support.any():
        return SilhouetteMask(np.zeros(frame.shape))
    disk = _disk(params.dilate_radius)
    dilated = ndimage.binary_dilation(support, structure=disk)
    # Flood the exterior from the border; everything else is interior.
    exterior = ~dilated
    labels, _ = ndimage.label(exterior)
    border_labels = np.unique(
        np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])
    )
    border_labels = border_labels[border_labels != 0]
    interior = ~np.isin(labels, border_labels)
    eroded = ndimage.binary_erosion(interior, structure=disk)
    if not eroded.any():
        return SilhouetteMask(np.zeros(frame.shape))
    comp, n_comp = ndimage.label(eroded)
    sizes = np.bincount(comp.reshape(-1))[1:]
    best = int(np.argmax(sizes)) + 1
    if sizes[best - 1] < params.min_component:
        return SilhouetteMask(np.zeros(frame.shape))
    return SilhouetteMask((comp == best).astype(np.float64))


def silhouette_source(
    kind: str,
    *,
    gt_masks: list[SilhouetteMask] | None = None,
    gt_poses: list[CameraPose] | None = None,
    event_frames: list[EventFrame] | None = None,
    frame_poses: list[CameraPose] | None = None,
    params: ExtractParams = ExtractParams(),
) -> list[tuple[SilhouetteMask, CameraPose]]:
    """Uniform access to supervision masks.

    `oracle` pairs ground-truth masks with their poses; `extracted` runs
    extract_silhouette on each event frame with its paired pose.
    """
    if kind == "oracle":
        if gt_masks is None or gt_poses is None:
            raise ValueError("oracle source needs gt_masks and gt_poses")
        if len(gt_masks) != len(gt_poses):
            raise ValueError(f"mask/pose count mismatch: {len(gt_masks)} vs {len(gt_poses)}")
        return list(zip(gt_masks, gt_poses))
    if kind == "extracted":
        if event_frames is None or frame_poses is None:
            raise ValueError("extracted source needs event_frames and frame_poses")
        if len(event_frames) != len(frame_poses):
            raise ValueError(
                f"frame/pose count mismatch: {len(event_frames)} vs {len(frame_poses)}"
            )
        return [(extract_silhouette(f, params), p) for f, p in zip(event_frames, frame_poses)]
    raise ValueError(f"unknown silhouette source {kind!r}")
