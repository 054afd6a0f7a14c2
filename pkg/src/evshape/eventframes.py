"""Count-based binning of event streams into per-polarity histograms.

Every full bin consumes exactly `count` consecutive events (B = floor(N/count)
bins, trailing remainder dropped) so all frames share the same event density.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .camera import CameraPose, Trajectory
from .eventsim import EventStream
from . import imgio


@dataclass(frozen=True)
class EventFrame:
    """Positive/negative count grids plus the bin's time window [t_start, t_end]."""

    pos: np.ndarray
    neg: np.ndarray
    t_start: int
    t_end: int
    pose_t_us: int | None = None

    def __post_init__(self):
        pos = np.ascontiguousarray(np.asarray(self.pos, dtype=np.int32))
        neg = np.ascontiguousarray(np.asarray(self.neg, dtype=np.int32))
        if pos.shape != neg.shape or pos.ndim != 2:
            raise ValueError("count grids must be equal-shape 2-D")
        if pos.size and (pos.min() < 0 or neg.min() < 0):
            raise ValueError("counts must be non-negative")
        pos.setflags(write=False)
        neg.setflags(write=False)
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "neg", neg)

    @property
    def shape(self):
        return self.pos.shape

    def combined(self) -> np.ndarray:
        return self.pos + self.neg

    def total(self) -> int:
        return int(self.pos.sum()) + int(self.neg.sum())


def bin_events(stream: EventStream, count: int) -> list[EventFrame]:
    """Split the stream into floor(N/count) frames of exactly `count` events."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    n_bins = len(stream) // count
    h, w = stream.height, stream.width
    flat = stream.y.astype(np.int64) * w + stream.x.astype(np.int64)
    frames = []
    for b in range(n_bins):
        lo, hi = b * count, (b + 1) * count
        sel_pos = flat[lo:hi][stream.p[lo:hi] > 0]
        sel_neg = flat[lo:hi][stream.p[lo:hi] < 0]
        pos = np.bincount(sel_pos, minlength=h * w).reshape(h, w)
        neg = np.bincount(sel_neg, minlength=h * w).reshape(h, w)
        frames.append(EventFrame(pos, neg, int(stream.t[lo]), int(stream.t[hi - 1])))
    return frames


def frame_to_image(frame: EventFrame) -> np.ndarray:
    """(H,W,3) bytes: ch0 = positive counts, ch1 = negative, ch2 = 0; clamp 255."""
    img = np.zeros((*frame.shape, 3), dtype=np.uint8)
    img[:, :, 0] = np.minimum(frame.pos, 255)
    img[:, :, 1] = np.minimum(frame.neg, 255)
    return img


def denoise_frame(frame: EventFrame, min_count: int) -> EventFrame:
    """Zero pixels whose combined count falls below min_count."""
    if min_count < 0:
        raise ValueError("min_count must be >= 0")
    keep = frame.combined() >= min_count
    return replace(frame, pos=np.where(keep, frame.pos, 0), neg=np.where(keep, frame.neg, 0))


def assign_poses(
    frames: list[EventFrame], trajectory: Trajectory
) -> list[tuple[EventFrame, CameraPose]]:
    """Pair each frame with the pose nearest its bin midpoint (earliest on ties)."""
    out = []
    for frame in frames:
        mid = (frame.t_start + frame.t_end) // 2
        i = int(np.argmin(np.abs(trajectory.t_us - mid)))
        out.append((replace(frame, pose_t_us=int(trajectory.t_us[i])), trajectory.poses[i]))
    return out


def save_frame_ppm(path, frame: EventFrame) -> None:
    imgio.write_ppm(path, frame_to_image(frame))
