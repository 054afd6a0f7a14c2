"""Visual-hull baseline: silhouette voxel carving and isosurface extraction.

A voxel stays occupied iff its center projects with positive depth inside
every silhouette; behind-camera or out-of-frame projections count as outside,
so any all-zero mask empties the grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from skimage import measure

from .camera import CameraPose, Intrinsics
from .geometry import TriangleMesh
from .render import SilhouetteMask


@dataclass(frozen=True)
class GridSpec:
    """Per-axis resolution and axis-aligned world bounds (meters)."""

    resolution: tuple[int, int, int] = (64, 64, 64)
    bounds_min: tuple[float, float, float] = (-1.2, -1.2, -1.2)
    bounds_max: tuple[float, float, float] = (1.2, 1.2, 1.2)

    def __post_init__(self):
        if min(self.resolution) < 2:
            raise ValueError("grid resolution must be >= 2 per axis")
        if any(lo >= hi for lo, hi in zip(self.bounds_min, self.bounds_max)):
            raise ValueError("bounds_min must be < bounds_max per axis")


@dataclass(frozen=True)
class VoxelGrid:
    """Boolean occupancy over a regular axis-aligned lattice."""

    occupancy: np.ndarray
    bounds_min: np.ndarray
    bounds_max: np.ndarray

    def __post_init__(self):
        occ = np.ascontiguousarray(np.asarray(self.occupancy, dtype=bool))
        lo = np.asarray(self.bounds_min, dtype=np.float64).reshape(3)
        hi = np.asarray(self.bounds_max, dtype=np.float64).reshape(3)
        if occ.ndim != 3 or min(occ.shape) < 2:
            raise ValueError("occupancy must be 3-D with >= 2 voxels per axis")
        if np.any(lo >= hi):
            raise ValueError("bounds_min must be < bounds_max per axis")
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "bounds_min", lo)
        object.__setattr__(self, "bounds_max", hi)

    @property
    def resolution(self) -> tuple[int, int, int]:
        return self.occupancy.shape

    def voxel_size(self) -> np.ndarray:
        return (self.bounds_max - self.bounds_min) / np.array(self.occupancy.shape)

    def centers(self) -> np.ndarray:
        """(N,3) world coordinates of all voxel centers, C-order."""
        axes = [
            self.bounds_min[d] + (np.arange(self.occupancy.shape[d]) + 0.5) * self.voxel_size()[d]
            for d in range(3)
        ]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.stack([gx.reshape(-1), gy.reshape(-1), gz.reshape(-1)], axis=1)

    def occupied_volume(self) -> float:
        return float(self.occupancy.sum()) * float(np.prod(self.voxel_size()))


def carve(
    views: list[tuple[SilhouetteMask, CameraPose]],
    K: Intrinsics,
    spec: GridSpec = GridSpec(),
) -> VoxelGrid:
    """Intersect the silhouette cones of every view over the voxel lattice."""
    if not views:
        raise ValueError("carving needs at least one view")
    occ = np.ones(spec.resolution, dtype=bool)
    grid = VoxelGrid(occ, spec.bounds_min, spec.bounds_max)
    centers = grid.centers()
    alive = np.ones(len(centers), dtype=bool)
    for mask, pose in views:
        if not alive.any():
            break
        pts = centers[alive]
        view = pts @ pose.rotation().T + pose.t
        z = view[:, 2]
        ok = z > 1e-9
        u = np.where(ok, K.focal * view[:, 0] / np.where(ok, z, 1.0) + K.cx, -1.0)
        v = np.where(ok, K.focal * view[:, 1] / np.where(ok, z, 1.0) + K.cy, -1.0)
        ix = np.floor(u).astype(np.int64)
        iy = np.floor(v).astype(np.int64)
        in_frame = ok & (ix >= 0) & (ix < K.width) & (iy >= 0) & (iy < K.height)
        inside = np.zeros(len(pts), dtype=bool)
        if in_frame.any():
            inside[in_frame] = mask.pixels[iy[in_frame], ix[in_frame]] >= 0.5
        alive[np.flatnonzero(alive)[~inside]] = False
    return VoxelGrid(alive.reshape(spec.resolution), spec.bounds_min, spec.bounds_max)


def grid_to_mesh(grid: VoxelGrid) -> TriangleMesh:
    """Isosurface of the occupancy at level 0.5 via marching cubes.

    The binary field is sampled at voxel centers and zero-padded so shapes
    touching the grid boundary still close.
    """
    if not grid.occupancy.any():
        raise ValueError("cannot mesh an empty grid")
    field = np.pad(grid.occupancy.astype(np.float64), 1)
    verts, faces, _, _ = measure.marching_cubes(field, level=0.5)
    size = grid.voxel_size()
    # Lattice index -> world: sample i sits at bounds_min + (i − 1 + 0.5)·size
    # after padding by one sample.
    world = grid.bounds_min + (verts - 0.5) * size
    return TriangleMesh(world, faces.astype(np.int32))


def save_grid(grid: VoxelGrid, bits_path, sidecar_path) -> None:
    """Raw packed bitset plus a JSON sidecar with dims and bounds."""
    Path(bits_path).write_bytes(np.packbits(grid.occupancy.reshape(-1)).tobytes())
    sidecar = {
        "resolution": list(grid.resolution),
        "bounds_min": [float(x) for x in grid.bounds_min],
        "bounds_max": [float(x) for x in grid.bounds_max],
    }
    Path(sidecar_path).write_text(json.dumps(sidecar, sort_keys=True) + "\n")


def load_grid(bits_path, sidecar_path) -> VoxelGrid:
    meta = json.loads(Path(sidecar_path).read_text())
    res = tuple(meta["resolution"])
    n = int(np.prod(res))
    bits = np.unpackbits(np.frombuffer(Path(bits_path).read_bytes(), dtype=np.uint8))[:n]
    return VoxelGrid(bits.astype(bool).reshape(res), meta["bounds_min"], meta["bounds_max"])
