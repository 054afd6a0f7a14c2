import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evshape.camera import CameraPose, Intrinsics, look_at
from evshape.geometry import PointCloud, TriangleMesh, make_icosphere
from evshape.losses import loss_iou
from evshape.metrics import (
    chamfer,
    chamfer_between_meshes,
    mean_iou,
    median_over_set,
    mesh_reprojection_iou,
    pose_errors,
    pose_threshold_accuracy,
    read_metrics_report,
    write_metrics_report,
)
from evshape.render import SilhouetteMask, rasterize_silhouette

K = Intrinsics(64, 64, 64.0)


def _mask(arr):
    return SilhouetteMask(np.asarray(arr, dtype=float))


def test_mean_iou_identical_pairs():
    m = _mask(np.eye(6))
    assert mean_iou([(m, m), (m, m)]) <= 1e-6


def test_mean_iou_mixed():
    a = np.zeros((4, 4)); a[0, 0] = 1
    b = np.zeros((4, 4)); b[3, 3] = 1
    perfect = (_mask(a), _mask(a))
    disjoint = (_mask(a), _mask(b))
    assert mean_iou([perfect, disjoint]) == pytest.approx(0.5, abs=1e-6)


def test_mean_iou_matches_per_pair_average():
    rng = np.random.default_rng(0)
    pairs = [
        (_mask((rng.random((5, 5)) > 0.5).astype(float)),
         _mask((rng.random((5, 5)) > 0.5).astype(float)))
        for _ in range(7)
    ]
    expected = float(np.mean([loss_iou(a, b)[0] for a, b in pairs]))
    assert mean_iou(pairs) == pytest.approx(expected, rel=1e-12)


def test_mean_iou_empty_list():
    with pytest.raises(ValueError):
        mean_iou([])


def test_reprojection_self_consistency():
    mesh = make_icosphere(2, 0.7)
    poses = [look_at((0, 0, 3), (0, 0, 0)), look_at((2, 1, 2), (0, 0, 0))]
    views = [(rasterize_silhouette(mesh, p, K), p) for p in poses]
    assert mesh_reprojection_iou(mesh, views, K) <= 0.01


def test_reprojection_empty_mesh():
    mesh = make_icosphere(2, 0.7)
    poses = [look_at((0, 0, 3), (0, 0, 0))]
    views = [(rasterize_silhouette(mesh, p, K), p) for p in poses]
    empty = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int32))
    assert mesh_reprojection_iou(empty, views, K) == pytest.approx(1.0, abs=1e-6)


def test_reprojection_matches_manual_per_view():
    mesh = make_icosphere(1, 0.7)
    target = make_icosphere(2, 0.8)
    poses = [look_at((0, 0, 3), (0, 0, 0)), look_at((1, 2, 2), (0, 0, 0)),
             look_at((-2, 0.5, 1.5), (0, 0, 0))]
    views = [(rasterize_silhouette(target, p, K), p) for p in poses]
    manual = np.mean(
        [loss_iou(gt, rasterize_silhouette(mesh, p, K))[0] for gt, p in views]
    )
    assert mesh_reprojection_iou(mesh, views, K) == pytest.approx(float(manual), rel=1e-12)


def test_chamfer_identical_clouds():
    pts = PointCloud(np.random.default_rng(0).normal(0, 1, (50, 3)))
    assert chamfer(pts, pts) == 0.0


def test_chamfer_unit_separation():
    a = PointCloud(np.array([[0.0, 0, 0]]))
    b = PointCloud(np.array([[1.0, 0, 0]]))
    assert chamfer(a, b) == 1.0


def _brute_force_chamfer(a, b):
    mins_a = []
    for p in a:
        dists = [np.sqrt(((p - q) ** 2).sum()) for q in b]
        mins_a.append(min(dists))
    mins_b = []
    for q in b:
        dists = [np.sqrt(((q - p) ** 2).sum()) for p in a]
        mins_b.append(min(dists))
    return 0.5 * (float(np.mean(np.array(mins_a))) + float(np.mean(np.array(mins_b))))


def test_chamfer_matches_brute_force_bitwise():
    rng = np.random.default_rng(17)
    a = rng.normal(0, 1, (50, 3))
    b = rng.normal(0.5, 1.2, (50, 3))
    assert chamfer(PointCloud(a), PointCloud(b)) == _brute_force_chamfer(a, b)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=20, deadline=None)
def test_chamfer_symmetric_nonnegative(seed):
    rng = np.random.default_rng(seed)
    a = PointCloud(rng.normal(0, 1, (11, 3)))
    b = PointCloud(rng.normal(0, 1, (7, 3)))
    ab = chamfer(a, b)
    assert ab >= 0.0
    assert ab == chamfer(b, a)


def test_chamfer_squared_variant():
    a = PointCloud(np.array([[0.0, 0, 0]]))
    b = PointCloud(np.array([[2.0, 0, 0]]))
    assert chamfer(a, b) == 2.0
    assert chamfer(a, b, squared=True) == 4.0


def test_chamfer_empty_cloud():
    a = PointCloud(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        chamfer(a, a)


def test_chamfer_between_meshes_self_zero():
    mesh = make_icosphere(3, 1.0)
    assert chamfer_between_meshes(mesh, mesh, 10_000, 0) == 0.0


def test_pose_errors_identity():
    p = look_at((1, 2, 3), (0, 0, 0))
    assert pose_errors(p, p) == (0.0, 0.0)


def test_pose_errors_180_degrees():
    p = CameraPose(t=np.zeros(3), q=np.array([1.0, 0, 0, 0]))
    p_hat = CameraPose(t=np.zeros(3), q=np.array([0.0, 0, 0, 1.0]))
    t_err, rot = pose_errors(p, p_hat)
    assert t_err == 0.0
    assert rot == pytest.approx(180.0, abs=1e-6)


def test_pose_errors_90_degrees():
    s = math.sin(math.pi / 4)
    p = CameraPose(t=np.zeros(3), q=np.array([math.cos(math.pi / 4), 0, 0, s]))
    p_hat = CameraPose(t=np.zeros(3), q=np.array([1.0, 0, 0, 0]))
    assert pose_errors(p, p_hat)[1] == pytest.approx(90.0, abs=1e-9)


def test_pose_errors_sign_invariant():
    rng = np.random.default_rng(5)
    q = rng.normal(0, 1, 4)
    p = CameraPose(t=np.zeros(3), q=q)
    p_hat = CameraPose(t=np.zeros(3), q=-q)  # canonicalized on construction
    assert pose_errors(p, p_hat)[1] == pytest.approx(0.0, abs=1e-6)


def test_rot_err_range():
    rng = np.random.default_rng(6)
    for _ in range(50):
        p = CameraPose(t=np.zeros(3), q=rng.normal(0, 1, 4))
        q = CameraPose(t=np.zeros(3), q=rng.normal(0, 1, 4))
        _, rot = pose_errors(p, q)
        assert 0.0 <= rot <= 180.0


def test_t_err_invariant_under_joint_rotation():
    rng = np.random.default_rng(9)
    t_a, t_b = rng.normal(0, 2, 3), rng.normal(0, 2, 3)
    q_id = np.array([1.0, 0, 0, 0])
    base = pose_errors(CameraPose(t=t_a, q=q_id), CameraPose(t=t_b, q=q_id))[0]
    axis = rng.normal(0, 1, 3); axis /= np.linalg.norm(axis)
    ang = 0.9
    kx = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    rot = np.eye(3) + np.sin(ang) * kx + (1 - np.cos(ang)) * kx @ kx
    spun = pose_errors(CameraPose(t=rot @ t_a, q=q_id), CameraPose(t=rot @ t_b, q=q_id))[0]
    assert spun == pytest.approx(base, rel=1e-12)


def test_median_conventions():
    assert median_over_set([1.0]) == 1.0
    assert median_over_set([3.0, 1.0, 2.0]) == 2.0
    assert median_over_set([4.0, 2.0, 3.0, 1.0]) == 2.0  # lower median
    with pytest.raises(ValueError):
        median_over_set([])


def test_threshold_accuracy():
    near = look_at((0, 0, 3), (0, 0, 0))
    far = CameraPose(t=near.t + np.array([5.0, 0, 0]), q=near.q)
    assert pose_threshold_accuracy([(near, near), (near, far)]) == 0.5


def test_metrics_report_roundtrip(tmp_path):
    report = {"alpha": 1.5, "beta": "text", "count": 3}
    write_metrics_report(report, tmp_path / "r.txt", tmp_path / "r.json")
    back = read_metrics_report(tmp_path / "r.json")
    assert back == report
    text = (tmp_path / "r.txt").read_text()
    assert "alpha = 1.5" in text and text.index("alpha") < text.index("beta")
