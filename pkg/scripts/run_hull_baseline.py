#!/usr/bin/env python3
"""Visual-hull baseline on a unit sphere: carve, mesh, and report volume.

Reproduces the containment/volume sanity experiment (16 views, 64³ grid).
"""

import argparse

import numpy as np

from evshape import hull
from evshape.camera import AugmentationParams, Intrinsics, generate_trajectory
from evshape.geometry import make_icosphere, save_obj
from evshape.metrics import chamfer_between_meshes
from evshape.render import rasterize_silhouette


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--views", type=int, default=16)
    ap.add_argument("--res", type=int, default=64)
    ap.add_argument("--distance", type=float, default=3.0)
    ap.add_argument("--out", default="hull.obj")
    args = ap.parse_args()

    K = Intrinsics()
    sphere = make_icosphere(4, 1.0)
    traj = generate_trajectory(args.views, args.distance, 30.0, AugmentationParams(), seed=5)
    views = [(rasterize_silhouette(sphere, p, K), p) for p in traj.poses]
    spec = hull.GridSpec((args.res,) * 3, (-1.2, -1.2, -1.2), (1.2, 1.2, 1.2))
    grid = hull.carve(views, K, spec)

    v_sphere = 4 * np.pi / 3
    print(f"occupied voxels: {int(grid.occupancy.sum())} / {grid.occupancy.size}")
    print(f"hull volume:     {grid.occupied_volume():.4f} (sphere {v_sphere:.4f})")
    mesh = hull.grid_to_mesh(grid)
    save_obj(mesh, args.out)
    print(f"hull mesh:       {mesh.n_vertices} vertices -> {args.out}")
    print(f"chamfer vs GT:   {chamfer_between_meshes(mesh, sphere):.4f} m")


if __name__ == "__main__":
    main()
