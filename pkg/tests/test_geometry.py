import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from surfreg.exceptions import EmptyCloudError, NonFiniteCoordinateError
from surfreg.geometry import (
    EulerAngles,
    PointCloud,
    RigidMotion,
    apply_motion,
    bounding_box,
    centroid,
    compose,
    downsample,
    euler_to_matrix,
    inverse,
    matrix_to_euler,
    normalize_angle,
)

from conftest import random_motion

finite_angle = st.floats(-1e4, 1e4, allow_nan=False)


def test_identity_angles_give_identity_matrix():
    assert np.array_equal(euler_to_matrix(EulerAngles()), np.eye(3))


def test_quarter_turn_about_z():
    p = euler_to_matrix((0, 0, 90)) @ np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(p, [0.0, 1.0, 0.0], atol=1e-15)


def test_thirty_degrees_about_x():
    p = euler_to_matrix((30, 0, 0)) @ np.array([0.0, 1.0, 0.0])
    np.testing.assert_allclose(p, [0.0, math.cos(math.radians(30)), 0.5], atol=1e-15)


def test_convention_matches_extrinsic_xyz_oracle(rng):
    for _ in range(200):
        a = rng.uniform(-180, 180, size=3)
        oracle = Rotation.from_euler("xyz", a, degrees=True).as_matrix()
        np.testing.assert_allclose(euler_to_matrix(a), oracle, atol=1e-14)


def test_rotation_matrices_are_proper(rng):
    for a in rng.uniform(-180, 180, size=(1000, 3)):
        R = euler_to_matrix(a)
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(R) - 1.0) < 1e-12


def test_normalize_angle_examples():
    assert normalize_angle(540.0) == -180.0
    assert normalize_angle(180.0) == -180.0
    assert normalize_angle(-180.0) == -180.0
    assert normalize_angle(359.0) == -1.0
    assert normalize_angle(-190.0) == 170.0


@given(finite_angle)
def test_normalize_angle_range_and_idempotence(a):
    n = normalize_angle(a)
    assert -180.0 <= n < 180.0
    assert normalize_angle(n) == n
    assert math.isclose(math.cos(math.radians(n)), math.cos(math.radians(a)), abs_tol=1e-9)


def test_euler_angles_reject_nan():
    with pytest.raises(NonFiniteCoordinateError):
        EulerAngles(float("nan"), 0, 0)


@given(st.floats(-180, 179.999, allow_nan=False), st.floats(-89.9, 89.9, allow_nan=False),
       st.floats(-180, 179.999, allow_nan=False))
@settings(max_examples=200)
def test_matrix_to_euler_round_trip(a, b, p):
    R = euler_to_matrix((a, b, p))
    np.testing.assert_allclose(euler_to_matrix(matrix_to_euler(R)), R, atol=1e-12)


def test_matrix_to_euler_gimbal_lock_folds_into_psi():
    R = euler_to_matrix((30, 90, 10))
    e = matrix_to_euler(R)
    assert e.alpha == 0.0
    assert abs(e.beta - 90.0) < 1e-6
    np.testing.assert_allclose(euler_to_matrix(e), R, atol=1e-9)


def test_apply_motion_identity_and_translation():
    cloud = PointCloud(np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]))
    assert apply_motion(RigidMotion.identity(), cloud) == cloud
    moved = apply_motion(RigidMotion(EulerAngles(), (1, 2, 3)), PointCloud([[0.0, 0.0, 0.0]]))
    assert np.array_equal(moved.points, [[1.0, 2.0, 3.0]])


def test_apply_motion_rejects_empty():
    with pytest.raises(EmptyCloudError):
        apply_motion(RigidMotion.identity(), PointCloud(np.empty((0, 3))))


def test_inverse_round_trip(rng):
    pts = rng.uniform(-500, 500, size=(100, 3))
    for _ in range(50):
        m = random_motion(rng)
        back = apply_motion(inverse(m), apply_motion(m, pts))
        assert np.max(np.abs(back.points - pts)) < 1e-9


def test_inverse_special_cases():
    inv = inverse(RigidMotion.identity())
    np.testing.assert_allclose(inv.translation, (0, 0, 0), atol=0)
    np.testing.assert_allclose(inv.rotation.as_tuple(), (0, 0, 0), atol=1e-12)
    inv = inverse(RigidMotion(EulerAngles(), (1.5, -2.0, 3.0)))
    np.testing.assert_allclose(inv.translation, (-1.5, 2.0, -3.0), atol=0)


def test_compose_matches_sequential_application(rng):
    pts = rng.normal(size=(20, 3))
    a, b = random_motion(rng), random_motion(rng)
    np.testing.assert_allclose(apply_motion(compose(a, b), pts).points,
                               apply_motion(b, apply_motion(a, pts)).points, atol=1e-9)


def test_distances_preserved(rng):
    for _ in range(100):
        m = random_motion(rng, 1000)
        p, q = rng.uniform(-500, 500, size=(2, 3))
        p2, q2 = apply_motion(m, np.array([p, q])).points
        assert abs(np.linalg.norm(p2 - q2) - np.linalg.norm(p - q)) < 1e-9


def test_centroid():
    np.testing.assert_array_equal(centroid([[0, 0, 0], [2, 0, 0]]), [1, 0, 0])
    np.testing.assert_array_equal(centroid([[3, 4, 5]]), [3, 4, 5])
    for seed in range(5):
        pts = np.random.default_rng(seed).uniform(size=(1000, 3))
        assert np.all(np.abs(centroid(pts) - 0.5) < 0.05)
    with pytest.raises(EmptyCloudError):
        centroid(np.empty((0, 3)))


def test_bounding_box(rng):
    box = bounding_box([[0, 0, 0], [1, 2, 3]])
    np.testing.assert_array_equal(box.min, [0, 0, 0])
    np.testing.assert_array_equal(box.max, [1, 2, 3])
    single = bounding_box([[1, 1, 1]])
    assert np.array_equal(single.min, single.max)
    pts = rng.normal(size=(500, 3))
    assert bounding_box(pts).contains(pts).all()


def test_downsample_noop_and_determinism(rng):
    small = PointCloud(rng.normal(size=(10, 3)))
    assert downsample(small, 20) is small
    assert downsample(small, 10) is small
    big = PointCloud(rng.normal(size=(5000, 3)))
    a = downsample(big, 1000, seed=3)
    b = downsample(big, 1000, seed=3)
    assert len(a) == 1000 and a == b
    rows = {tuple(r) for r in big.points}
    assert all(tuple(r) in rows for r in a.points)
    with pytest.raises(ValueError):
        downsample(big, 0)


def test_point_cloud_is_read_only():
    src = np.zeros((3, 3))
    cloud = PointCloud(src)
    src[0, 0] = 7.0
    assert cloud.points[0, 0] == 0.0
    with pytest.raises(ValueError):
        cloud.points[0, 0] = 1.0


def test_point_cloud_rejects_non_finite():
    with pytest.raises(NonFiniteCoordinateError):
        PointCloud([[0.0, np.inf, 0.0]])
