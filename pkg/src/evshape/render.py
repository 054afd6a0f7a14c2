"""Hard rasterizer: ground-truth silhouettes and shaded intensity frames.

Coverage is tested at pixel centers (ix + 0.5, iy + 0.5) with perspective
projection; intensity rendering z-buffers flat-shaded Lambertian faces over a
fixed background image. Deterministic: identical inputs give bit-identical
frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraPose, Intrinsics, Trajectory
from .geometry import TriangleMesh
from . import imgio

_Z_NEAR = 1e-9


@dataclass(frozen=True)
class IntensityFrame:
    """Linear intensity grid (H,W) in [0,1] with a microsecond timestamp."""

    pixels: np.ndarray
    t_us: int = 0

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.float64))
        if p.ndim != 2:
            raise ValueError("intensity grid must be 2-D")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise ValueError("intensity values must lie in [0,1]")
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)
        object.__setattr__(self, "t_us", int(self.t_us))

    @property
    def shape(self):
        return self.pixels.shape


@dataclass(frozen=True)
class SilhouetteMask:
    """Per-pixel occupancy (H,W) in [0,1]; ground truths are binary {0,1}."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.float64))
        if p.ndim != 2:
            raise ValueError("mask grid must be 2-D")
        if p.size and (p.min() < -1e-12 or p.max() > 1.0 + 1e-12):
            raise ValueError("mask values must lie in [0,1]")
        p.setflags(write=False)
        object.__setattr__(self, "pixels", np.clip(p, 0.0, 1.0))

    @property
    def shape(self):
        return self.pixels.shape

    def area(self) -> float:
        return float(self.pixels.sum())


def _project_vertices(mesh: TriangleMesh, pose: CameraPose, K: Intrinsics):
    view = pose.transform(mesh.vertices)
    z = view[:, 2]
    safe_z = np.where(z > _Z_NEAR, z, 1.0)
    u = K.focal * view[:, 0] / safe_z + K.cx
    v = K.focal * view[:, 1] / safe_z + K.cy
    return view, u, v


def _visible_faces(mesh: TriangleMesh, z: np.ndarray) -> np.ndarray:
    # Faces with any vertex at/behind the camera are dropped (no clipping).
    if mesh.n_faces == 0:
        return np.zeros(0, dtype=bool)
    return (z[mesh.faces] > _Z_NEAR).all(axis=1)


def _rasterize(mesh, pose, K, shade=None):
    """Shared z-buffer scan. Returns (covered bool (H,W), image or None)."""
    h, w = K.height, K.width
    covered = np.zeros((h, w), dtype=bool)
    image = None if shade is None else np.zeros((h, w), dtype=np.float64)
    if mesh.n_faces == 0:
        return covered, image
    view, u, v = _project_vertices(mesh, pose, K)
    keep = _visible_faces(mesh, view[:, 2])
    if not keep.any():
        return covered, image
    zbuf = np.full((h, w), np.inf) if shade is not None else None
    inv_z = 1.0 / view[:, 2]
    for fi in np.flatnonzero(keep):
        i0, i1, i2 = mesh.faces[fi]
        ux, vy = u[[i0, i1, i2]], v[[i0, i1, i2]]
        # Pixel-center bounding box, clipped to the frame.
        x_lo = max(int(np.floor(ux.min() - 0.5)), 0)
        x_hi = min(int(np.ceil(ux.max() - 0.5)), w - 1)
        y_lo = max(int(np.floor(vy.min() - 0.5)), 0)
        y_hi = min(int(np.ceil(vy.max() - 0.5)), h - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        px = np.arange(x_lo, x_hi + 1) + 0.5
        py = np.arange(y_lo, y_hi + 1) + 0.5
        gx, gy = np.meshgrid(px, py)
        e0 = (ux[1] - ux[0]) * (gy - vy[0]) - (vy[1] - vy[0]) * (gx - ux[0])
        e1 = (ux[2] - ux[1]) * (gy - vy[1]) - (vy[2] - vy[1]) * (gx - ux[1])
        e2 = (ux[0] - ux[2]) * (gy - vy[2]) - (vy[0] - vy[2]) * (gx - ux[2])
        area = (ux[1] - ux[0]) * (vy[2] - vy[0]) - (vy[1] - vy[0]) * (ux[2] - ux[0])
        if area == 0.0:
            continue
        sign = 1.0 if area > 0 else -1.0
        inside = (sign * e0 >= 0) & (sign * e1 >= 0) & (sign * e2 >= 0)
        if not inside.any():
            continue
        ys, xs = np.nonzero(inside)
        covered[ys + y_lo, xs + x_lo] = True
        if shade is not None:
            # Perspective-correct depth: 1/z interpolates linearly in screen space.
            b0 = e1[inside] / area
            b1 = e2[inside] / area
            b2 = e0[inside] / area
            zi = 1.0 / (b0 * inv_z[i0] + b1 * inv_z[i1] + b2 * inv_z[i2])
            rows, cols = ys + y_lo, xs + x_lo
            nearer = zi < zbuf[rows, cols]
            zbuf[rows[nearer], cols[nearer]] = zi[nearer]
            image[rows[nearer], cols[nearer]] = shade[fi]
    return covered, image


def rasterize_silhouette(mesh: TriangleMesh, pose: CameraPose, K: Intrinsics) -> SilhouetteMask:
    """Binary mask: 1 where any positive-depth face covers the pixel center."""
    covered, _ = _rasterize(mesh, pose, K)
    return SilhouetteMask(covered.astype(np.float64))


def render_intensity(
    mesh: TriangleMesh,
    albedo: np.ndarray,
    background: IntensityFrame,
    pose: CameraPose,
    K: Intrinsics,
    light_dir=(0.4, 0.8, 0.45),
) -> IntensityFrame:
    """Z-buffered flat Lambertian shading over the background.

    Covered pixels get albedo·max(0, n·l)·0.9 + 0.1; `light_dir` points toward
    the light in world space.
    """
    if background.shape != (K.height, K.width):
        raise ValueError(
            f"background {background.shape} does not match intrinsics {(K.height, K.width)}"
        )
    albedo = np.asarray(albedo, dtype=np.float64)
    if albedo.shape != (mesh.n_faces,):
        raise ValueError("albedo must be per-face")
    light = np.asarray(light_dir, dtype=np.float64)
    light = light / np.linalg.norm(light)
    lambert = np.maximum(0.0, mesh.face_normals() @ light)
    shade = np.clip(albedo * lambert * 0.9 + 0.1, 0.0, 1.0)
    covered, image = _rasterize(mesh, pose, K, shade=shade)
    out = np.where(covered, image, background.pixels)
    return IntensityFrame(out, background.t_us)


@dataclass(frozen=True)
class ShadingConfig:
    """Scene appearance: per-face albedo, background image, light direction."""

    albedo: np.ndarray
    background: IntensityFrame
    light_dir: tuple = (0.4, 0.8, 0.45)


def random_face_albedo(n_faces: int, seed: int, lo: float = 0.2, hi: float = 0.9) -> np.ndarray:
    """Seeded flat per-face albedo in [lo, hi] for edge contrast."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.uniform(lo, hi, n_faces)


def checkerboard_background(K: Intrinsics, tile: int = 20, lo: float = 0.3, hi: float = 0.8) -> IntensityFrame:
    """Procedural checkerboard; stands in for real panorama backgrounds."""
    ys, xs = np.mgrid[0 : K.height, 0 : K.width]
    checker = ((xs // tile) + (ys // tile)) % 2
    return IntensityFrame(np.where(checker == 0, lo, hi).astype(np.float64))


def background_from_image(pixels: np.ndarray, maxval: int, K: Intrinsics) -> IntensityFrame:
    """Stretch an arbitrary grayscale image to the sensor resolution."""
    img = np.asarray(pixels, dtype=np.float64) / float(maxval)
    ys = np.minimum((np.arange(K.height) * img.shape[0]) // K.height, img.shape[0] - 1)
    xs = np.minimum((np.arange(K.width) * img.shape[1]) // K.width, img.shape[1] - 1)
    return IntensityFrame(img[np.ix_(ys, xs)])


def render_sequence(
    mesh: TriangleMesh,
    trajectory: Trajectory,
    K: Intrinsics,
    shading: ShadingConfig,
) -> list[tuple[IntensityFrame, SilhouetteMask, CameraPose]]:
    """One (intensity, silhouette, pose) triple per trajectory pose."""
    out = []
    for t_us, pose in zip(trajectory.t_us, trajectory.poses):
        frame = render_intensity(mesh, shading.albedo, shading.background, pose, K, shading.light_dir)
        frame = IntensityFrame(frame.pixels, int(t_us))
        mask = rasterize_silhouette(mesh, pose, K)
        out.append((frame, mask, pose))
    return out


def save_intensity_pgm(path, frame: IntensityFrame) -> None:
    imgio.write_pgm(path, np.rint(frame.pixels * 65535.0).astype(np.uint16), maxval=65535)


def load_intensity_pgm(path, t_us: int = 0) -> IntensityFrame:
    data, maxval = imgio.read_pgm(path)
    return IntensityFrame(data.astype(np.float64) / float(maxval), t_us)


def save_mask_pgm(path, mask: SilhouetteMask) -> None:
    imgio.write_pgm(path, np.where(mask.pixels >= 0.5, 255, 0).astype(np.uint8), maxval=255)


def save_probability_pgm(path, mask: SilhouetteMask) -> None:
    """16-bit dump of a probability mask (debugging aid for soft renders)."""
    imgio.write_pgm(path, np.rint(mask.pixels * 65535.0).astype(np.uint16), maxval=65535)


def load_mask_pgm(path) -> SilhouetteMask:
    data, maxval = imgio.read_pgm(path)
    return SilhouetteMask((data.astype(np.float64) >= maxval / 2.0).astype(np.float64))
