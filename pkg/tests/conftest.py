import numpy as np
import pytest

from polartof import ellipsometry, render, scene


@pytest.fixture(scope="session")
def small_sensor():
    return scene.SensorConfig(num_bins=64, noise_sigma=0.0)


@pytest.fixture(scope="session")
def small_plane():
    return scene.make_synthetic_scene("plane", width=6, height=6,
                                      distance=0.12, tilt_deg=25.0)


@pytest.fixture(scope="session")
def small_cube(small_plane, small_sensor):
    return render.render_transient(small_plane, small_sensor)


@pytest.fixture(scope="session")
def uniform20():
    return ellipsometry.uniform_schedule(20)


def random_unit(rng, n=1):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v[0] if n == 1 else v
