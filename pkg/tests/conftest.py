from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gads.geometry import Camera, CameraIntrinsics, Pose

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def random_pose(rng, scale=1.0) -> Pose:
    return Pose(random_rotation(rng), rng.normal(size=3) * scale)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_camera():
    intr = CameraIntrinsics.from_fov(32, 24, 50.0)
    return Camera(intr, Pose.look_at((0.0, -4.0, 1.0), (0.0, 0.0, 0.3)))
