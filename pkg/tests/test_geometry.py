import numpy as np
import pytest

from wandcal.exceptions import BehindCameraError, InvalidArgumentError
from wandcal.geometry import (
    CameraIntrinsics,
    CameraPose,
    EulerAngles,
    camera_center,
    euler_from_rotation,
    look_at_rotation,
    normalize_fp,
    project,
    rotation_angle_between,
    rotation_derivatives,
    rotation_from_euler,
    wrap_angle,
)


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def test_identity_rotation():
    assert np.array_equal(rotation_from_euler([0, 0, 0]), np.eye(3))


def test_pure_yaw_matches_textbook_matrix():
    a = 0.3
    np.testing.assert_allclose(rotation_from_euler([0, 0, a]), _rz(a), atol=1e-15)


def test_composition_order_is_z_y_x():
    ax, ay, az = 0.1, -0.4, 1.2
    rx = np.array([[1, 0, 0], [0, np.cos(ax), -np.sin(ax)], [0, np.sin(ax), np.cos(ax)]])
    ry = np.array([[np.cos(ay), 0, np.sin(ay)], [0, 1, 0], [-np.sin(ay), 0, np.cos(ay)]])
    np.testing.assert_allclose(rotation_from_euler([ax, ay, az]), _rz(az) @ ry @ rx, atol=1e-15)


def test_rotation_is_orthonormal(rng):
    for _ in range(20):
        r = rotation_from_euler(rng.uniform(-np.pi, np.pi, 3))
        np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-14)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-14)


def test_euler_round_trip(rng):
    for _ in range(50):
        a = rng.uniform([-np.pi, -1.5, -np.pi], [np.pi, 1.5, np.pi])
        np.testing.assert_allclose(euler_from_rotation(rotation_from_euler(a)), a, atol=1e-12)


def test_rotation_derivatives_central_difference(rng):
    a = rng.uniform(-1, 1, 3)
    _, d = rotation_derivatives(a)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (rotation_from_euler(a + e) - rotation_from_euler(a - e)) / (2 * h)
        np.testing.assert_allclose(d[k], fd, atol=1e-9)


def test_wrap_angle():
    np.testing.assert_allclose(wrap_angle(np.array([3 * np.pi, -3 * np.pi / 2, 0.5])),
                               [np.pi, np.pi / 2, 0.5], atol=1e-15)


def test_project_on_axis_point_hits_principal_point():
    k = CameraIntrinsics(f=800.0, alpha=640.0, beta=480.0, gamma=1.0)
    u, v = project([0, 0, 5], ([0, 0, 0], [0, 0, 0]), k)
    assert (u, v) == (640.0, 480.0)


def test_project_hand_computed():
    # camera frame point (1, -2, 4): u = 100 + 1.1 * 500 * 0.25, v = 50 + 500 * -0.5
    k = CameraIntrinsics(f=500.0, alpha=100.0, beta=50.0, gamma=1.1)
    u, v = project([1, -2, 3], ([0, 0, 0], [0, 0, 1]), k)
    assert u == pytest.approx(100 + 1.1 * 500 * 0.25)
    assert v == pytest.approx(50 - 250)


def test_project_behind_camera_raises():
    k = CameraIntrinsics(f=500.0, alpha=0.0, beta=0.0)
    with pytest.raises(BehindCameraError) as err:
        project([0, 0, -1], ([0, 0, 0], [0, 0, 0]), k, marker_index=3, camera_index=1)
    assert err.value.marker_index == 3 and err.value.camera_index == 1


def test_normalize_fp_inverts_projection(rng):
    k = CameraIntrinsics(f=900.0, alpha=640.0, beta=480.0, gamma=1.02)
    x = np.array([0.3, -0.2, 4.0])
    u, v = project(x, ([0, 0, 0], [0, 0, 0]), k)
    ub, vb = normalize_fp((u, v), k)
    assert ub == pytest.approx(x[0] / x[2], abs=1e-15)
    assert vb == pytest.approx(x[1] / x[2], abs=1e-15)


def test_camera_center_maps_to_origin_of_camera_frame(rng):
    pose = CameraPose.from_arrays(rng.uniform(-1, 1, 3), rng.uniform(-3, 3, 3))
    c = camera_center(pose)
    np.testing.assert_allclose(pose.rotation @ c + pose.translation, 0, atol=1e-14)


def test_look_at_points_optical_axis_at_target():
    center, target = np.array([4.0, 0, 3]), np.array([0, 0, 1.0])
    r = look_at_rotation(center, target)
    p = r @ (target - center)
    assert p[2] > 0
    np.testing.assert_allclose(p[:2], 0, atol=1e-14)


def test_geodesic_angle_between():
    assert rotation_angle_between(np.eye(3), _rz(0.25)) == pytest.approx(0.25)


def test_invalid_intrinsics_rejected():
    with pytest.raises(InvalidArgumentError):
        CameraIntrinsics(f=-1.0, alpha=0, beta=0)
    with pytest.raises(InvalidArgumentError):
        EulerAngles(np.nan, 0, 0)


def test_geodesic_angle_small_and_large():
    assert rotation_angle_between(np.eye(3), _rz(1e-9)) == pytest.approx(1e-9, rel=1e-6)
    assert rotation_angle_between(np.eye(3), _rz(np.pi)) == pytest.approx(np.pi)
