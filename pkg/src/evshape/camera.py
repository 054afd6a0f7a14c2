"""Camera poses, pinhole projection, look-at frames, orbit trajectories.

Conventions: world-to-view transform x_view = R(q)·x_world + t, camera looks
down +z with image y pointing down. Quaternions are (w, x, y, z), unit norm,
canonicalized to w >= 0. Elevation is the angle above the target's horizontal
(x-z) plane; world up is +y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import FormatError


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Unit quaternion with canonical sign (first nonzero component > 0)."""
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n == 0 or not np.isfinite(n):
        raise ValueError("cannot normalize zero/non-finite quaternion")
    q = q / n
    for c in q:
        if c != 0.0:
            return q if c > 0 else -q
    return q


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quaternion_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate 3-vector(s) v by unit quaternion q (supports (...,3) arrays)."""
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    w, qv = q[0], q[1:]
    # v' = v + 2 w (qv x v) + 2 qv x (qv x v)
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Shepperd's method; returns canonical-sign unit quaternion."""
    m = np.asarray(m, dtype=np.float64)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    return quat_normalize(q)


@dataclass(frozen=True)
class CameraPose:
    """World-to-view pose p = (t, q); x_view = R(q)·x_world + t."""

    t: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(np.asarray(self.t, dtype=np.float64))
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise ValueError("t must be a finite 3-vector")
        q = quat_normalize(self.q)
        t.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "q", q)

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    def camera_center(self) -> np.ndarray:
        """Camera position in world coordinates: −Rᵀ t."""
        return -self.rotation().T @ self.t

    def transform(self, points: np.ndarray) -> np.ndarray:
        """World points (...,3) to view space."""
        return quaternion_rotate(self.q, points) + self.t


def poses_close(a: CameraPose, b: CameraPose, tol: float = 1e-9) -> bool:
    """Equality up to the q/−q double cover."""
    dq = min(np.abs(a.q - b.q).max(), np.abs(a.q + b.q).max())
    return bool(np.abs(a.t - b.t).max() <= tol and dq <= tol)


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels; principal point defaults to the center."""

    width: int = 280
    height: int = 280
    focal: float = 280.0
    cx: float | None = None
    cy: float | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.focal <= 0:
            raise ValueError("focal length must be positive")
        if self.cx is None:
            object.__setattr__(self, "cx", self.width / 2.0)
        if self.cy is None:
            object.__setattr__(self, "cy", self.height / 2.0)


class Projection(NamedTuple):
    u: float
    v: float
    depth: float
    behind: bool


def project(pose: CameraPose, K: Intrinsics, p_world: np.ndarray) -> Projection:
    """Pinhole projection; behind-camera points get a flag, not an exception."""
    x, y, z = pose.transform(np.asarray(p_world, dtype=np.float64))
    if z <= 0:
        return Projection(math.nan, math.nan, float(z), True)
    return Projection(K.focal * x / z + K.cx, K.focal * y / z + K.cy, float(z), False)


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> CameraPose:
    """Pose at `eye` looking toward `target`, image-up opposite world `up`."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    fwd = target - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise ValueError("eye and target coincide")
    fwd = fwd / n
    right = np.cross(fwd, up)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        raise ValueError("up vector is parallel to the view direction")
    right = right / rn
    down = np.cross(fwd, right)  # completes the right-handed (right, down, fwd) frame
    r = np.stack([right, down, fwd])
    return CameraPose(t=-r @ eye, q=quat_from_matrix(r))


@dataclass(frozen=True)
class Trajectory:
    """Ordered poses with strictly increasing microsecond timestamps."""

    poses: tuple[CameraPose, ...]
    t_us: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(np.asarray(self.t_us, dtype=np.int64))
        if len(t) != len(self.poses):
            raise ValueError("timestamp count must match pose count")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("timestamps must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "poses", tuple(self.poses))
        object.__setattr__(self, "t_us", t)

    def __len__(self) -> int:
        return len(self.poses)


@dataclass(frozen=True)
class AugmentationParams:
    """Handheld-orbit augmentation: slow oscillations plus per-view jitter.

    Amplitudes in meters/degrees; frequencies in cycles per full orbit;
    micro_sigma_deg is the std of per-view Gaussian jitter applied to both
    elevation and azimuth. Zero everything for an exact circular orbit.
    """

    dist_amplitude: float = 0.1
    dist_frequency: float = 1.0
    elev_amplitude: float = 10.0
    elev_frequency: float = 1.0
    micro_sigma_deg: float = 0.5

    @classmethod
    def disabled(cls) -> "AugmentationParams":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)


def generate_trajectory(
    n_views: int,
    base_distance: float = 1.8,
    base_elevation: float = 30.0,
    aug: AugmentationParams = AugmentationParams(),
    seed: int = 0,
    target=(0.0, 0.0, 0.0),
    frame_dt_us: int = 20_000,
) -> Trajectory:
    """Seeded 360° azimuth sweep around `target` with orbit augmentation.

    Azimuth starts at a seeded random offset even when augmentation is
    disabled. Every pose looks at `target`.
    """
    if n_views < 2:
        raise ValueError(f"n_views must be >= 2, got {n_views}")
    rng = np.random.Generator(np.random.PCG64(seed))
    target = np.asarray(target, dtype=np.float64)
    az0 = rng.uniform(0.0, 360.0)
    dist_phase = rng.uniform(0.0, 2.0 * math.pi)
    eps_elev = rng.normal(0.0, aug.micro_sigma_deg, n_views) if aug.micro_sigma_deg > 0 else np.zeros(n_views)
    eps_az = rng.normal(0.0, aug.micro_sigma_deg, n_views) if aug.micro_sigma_deg > 0 else np.zeros(n_views)

    i = np.arange(n_views)
    azimuth = az0 + 360.0 * i / n_views + eps_az
    elevation = base_elevation + aug.elev_amplitude * np.sin(2 * math.pi * aug.elev_frequency * i / n_views) + eps_elev
    distance = base_distance + aug.dist_amplitude * np.sin(2 * math.pi * aug.dist_frequency * i / n_views + dist_phase)

    poses = []
    for k in range(n_views):
        az = math.radians(azimuth[k])
        el = math.radians(elevation[k])
        direction = np.array(
            [math.cos(el) * math.cos(az), math.sin(el), math.cos(el) * math.sin(az)]
        )
        poses.append(look_at(target + distance[k] * direction, target))
    return Trajectory(tuple(poses), i * int(frame_dt_us))


def save_trajectory(traj: Trajectory, path) -> None:
    """One line per pose: `t_us tx ty tz qw qx qy qz` (repr-exact floats)."""
    lines = []
    for t_us, pose in zip(traj.t_us, traj.poses):
        nums = " ".join(repr(float(x)) for x in (*pose.t, *pose.q))
        lines.append(f"{int(t_us)} {nums}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_trajectory(path) -> Trajectory:
    poses = []
    times = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 8:
            raise FormatError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
        try:
            times.append(int(parts[0]))
            vals = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: bad number") from exc
        poses.append(CameraPose(t=np.array(vals[0:3]), q=np.array(vals[3:7])))
    if not poses:
        raise FormatError(f"{path}: empty trajectory")
    return Trajectory(tuple(poses), np.array(times, dtype=np.int64))
