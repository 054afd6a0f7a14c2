import pytest

from evshape import camera
from evshape.config import config_from_ini
from evshape.geometry import make_icosphere
from evshape.render import rasterize_silhouette
from evshape.scene import generate_scene


SMALL_SCENE_INI = """
[scene]
object = sphere
radius = 0.6
seed = 7
[camera]
n_views = 6
width = 100
height = 100
focal = 100.0
[events]
sigma_n = 0.0
sigma_c_pos = 0.0
sigma_c_neg = 0.0
[optim]
iterations = 20
"""


@pytest.fixture(scope="session")
def small_scene_dir(tmp_path_factory):
    """Tiny noise-free sphere scene shared by CLI-level tests."""
    out = tmp_path_factory.mktemp("scenes") / "small"
    generate_scene(config_from_ini(SMALL_SCENE_INI), out)
    return out


@pytest.fixture(scope="session")
def sphere_views():
    """24 oracle (mask, pose) views of a unit-ish sphere at 140² resolution."""
    K = camera.Intrinsics(140, 140, 140.0)
    mesh = make_icosphere(3, 0.6)
    traj = camera.generate_trajectory(24, 1.8, 30.0, camera.AugmentationParams(), seed=3)
    views = [(rasterize_silhouette(mesh, p, K), p) for p in traj.poses]
    return mesh, views, K
