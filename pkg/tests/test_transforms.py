import numpy as np
import pytest

from courtpose.errors import ValidationError
from courtpose.transforms import (axis_angle_to_matrix, look_at_rotation,
                                  matrix_to_axis_angle, nearest_rotation,
                                  random_rotation, rotation_defect)


def test_axis_angle_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(50):
        aa = rng.normal(scale=1.0, size=3)
        R = axis_angle_to_matrix(aa)
        assert rotation_defect(R) < 1e-12
        back = matrix_to_axis_angle(R)
        assert np.allclose(axis_angle_to_matrix(back), R, atol=1e-9)


def test_axis_angle_zero_is_identity():
    assert np.allclose(axis_angle_to_matrix(np.zeros(3)), np.eye(3))


def test_nearest_rotation_projects():
    rng = np.random.default_rng(1)
    R = random_rotation(rng)
    noisy = R + rng.normal(scale=1e-3, size=(3, 3))
    P = nearest_rotation(noisy)
    assert rotation_defect(P) < 1e-12
    assert np.abs(P - R).max() < 5e-3


def test_look_at_is_proper_rotation_and_faces_target():
    eye = np.array([1.0, 5.0, 10.0])
    target = np.array([0.0, 0.0, 0.0])
    R = look_at_rotation(eye, target)
    assert rotation_defect(R) < 1e-12
    fwd = R[2]
    d = (target - eye) / np.linalg.norm(target - eye)
    assert np.allclose(fwd, d)


def test_look_at_degenerate_up():
    with pytest.raises(ValidationError):
        look_at_rotation(np.array([0.0, 5.0, 0.0]), np.zeros(3))  # straight down, up parallel
