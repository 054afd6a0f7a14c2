#!/usr/bin/env python3
"""Sweep finite-difference gradient checks over many random scenes.

Wider net than the test suite: useful when touching the rasterizer backward
pass or the regularizer gradients.
"""

import argparse

import numpy as np

from evshape.camera import Intrinsics, look_at
from evshape.diffrender import SoftRenderConfig, soft_rasterize, soft_rasterize_backward
from evshape.geometry import TriangleMesh, make_icosphere
from evshape.losses import loss_flatten, loss_iou, loss_laplacian
from evshape.render import rasterize_silhouette


def central(f, verts, i, j, h):
    vp = verts.copy(); vp[i, j] += h
    vm = verts.copy(); vm[i, j] -= h
    return (f(vp) - f(vm)) / (2 * h)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenes", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--res", type=int, default=48)
    args = ap.parse_args()

    K = Intrinsics(args.res, args.res, float(args.res))
    cfg = SoftRenderConfig()
    worst = 0.0
    kinks = 0
    for s in range(args.scenes):
        rng = np.random.default_rng(args.seed + s)
        base = make_icosphere(1, 0.75)
        verts = base.vertices + rng.normal(0, 0.04, base.vertices.shape)
        faces = base.faces
        mesh = TriangleMesh(verts, faces)
        pose = look_at(rng.normal(0, 0.4, 3) + np.array([0, 0, 3.0]), (0, 0, 0))
        gt = rasterize_silhouette(make_icosphere(1, 0.7), pose, K)

        def f(v):
            return loss_iou(gt, soft_rasterize(TriangleMesh(v, faces), pose, K, cfg))[0]

        _, dpix = loss_iou(gt, soft_rasterize(mesh, pose, K, cfg))
        grad = soft_rasterize_backward(mesh, pose, K, cfg, dpix).grad
        coords = [(i, j) for i in range(len(verts)) for j in range(3)]
        for i, j in [coords[k] for k in rng.choice(len(coords), 24, replace=False)]:
            fd = central(f, verts, i, j, 1e-6)
            fd_small = central(f, verts, i, j, 1e-7)
            if abs(fd - fd_small) > 1e-2 * max(abs(fd), abs(fd_small), 1e-7):
                fd = fd_small
                kinks += 1
            err = abs(grad[i, j] - fd) / max(abs(fd), abs(grad[i, j]), 1e-4)
            worst = max(worst, err)
        for name, fn in (("lap", loss_laplacian), ("flat", loss_flatten)):
            val, g = fn(mesh)
            for i, j in [coords[k] for k in rng.choice(len(coords), 9, replace=False)]:
                fd = central(lambda v: fn(TriangleMesh(v, faces))[0], verts, i, j, 1e-6)
                err = abs(g[i, j] - fd) / max(abs(fd), abs(g[i, j]), 1e-6)
                worst = max(worst, err)
    print(f"{args.scenes} scenes: worst relative error {worst:.3e}, kink-straddling stencils {kinks}")


if __name__ == "__main__":
    main()
