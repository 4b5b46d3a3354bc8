import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from surfreg.exceptions import DegenerateConfigurationError, EmptyCloudError, TooFewPairsError
from surfreg.geometry import (
    EulerAngles,
    RigidMotion,
    apply_motion,
    bounding_box,
    compose,
    euler_to_matrix,
)
from surfreg.icp import CorrespondencePair, IcpConfig, fit_rigid, fit_rigid_arrays, icp_refine
from surfreg.synth import PairSpec, Shape, SurfaceSpec, make_pair

from conftest import random_motion


def _pairs(src, tgt):
    return [CorrespondencePair(tuple(a), tuple(b)) for a, b in zip(src, tgt)]


def test_identity_from_identical_points(rng):
    pts = rng.normal(size=(4, 3))
    m = fit_rigid(_pairs(pts, pts))
    np.testing.assert_allclose(m.matrix, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(m.translation, 0, atol=1e-12)


def test_recovers_known_motion_from_four_points(rng):
    for _ in range(20):
        m = random_motion(rng)
        src = rng.uniform(-100, 100, size=(4, 3))
        got = fit_rigid(_pairs(src, apply_motion(m, src).points))
        np.testing.assert_allclose(got.matrix, m.matrix, atol=1e-9)
        np.testing.assert_allclose(got.translation, m.translation, atol=1e-9)


def test_proper_rotation_on_near_planar_points(rng):
    for _ in range(50):
        m = random_motion(rng)
        src = rng.uniform(-100, 100, size=(20, 3))
        src[:, 2] *= 1e-6
        R, t = fit_rigid_arrays(src, apply_motion(m, src).points)
        assert abs(np.linalg.det(R) - 1.0) < 1e-10
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(R, m.matrix, atol=1e-9)


def test_reflection_is_not_returned(rng):
    src = rng.normal(size=(10, 3))
    mirrored = src * np.array([1.0, 1.0, -1.0])
    R, _ = fit_rigid_arrays(src, mirrored)
    assert abs(np.linalg.det(R) - 1.0) < 1e-10


def test_permutation_invariance(rng):
    m = random_motion(rng)
    src = rng.normal(size=(8, 3)) * 50
    pairs = _pairs(src, apply_motion(m, src).points)
    a = fit_rigid(pairs)
    b = fit_rigid([pairs[i] for i in rng.permutation(8)])
    np.testing.assert_allclose(a.matrix, b.matrix, atol=1e-12)
    np.testing.assert_allclose(a.translation, b.translation, atol=1e-9)


def test_too_few_and_degenerate():
    with pytest.raises(TooFewPairsError):
        fit_rigid(_pairs([[0, 0, 0], [1, 0, 0]], [[0, 0, 0], [1, 0, 0]]))
    line = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]
    with pytest.raises(DegenerateConfigurationError):
        fit_rigid(_pairs(line, line))
    same = [[1.0, 1.0, 1.0]] * 3
    with pytest.raises(DegenerateConfigurationError):
        fit_rigid(_pairs(same, same))


def test_correspondence_validation():
    with pytest.raises(Exception):
        CorrespondencePair((0.0, float("nan"), 0.0), (0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        CorrespondencePair((0.0, 0.0), (0.0, 0.0, 0.0))


def test_config_validation():
    with pytest.raises(ValueError):
        IcpConfig(max_iterations=0)
    with pytest.raises(ValueError):
        IcpConfig(convergence_epsilon=0.0)


def test_self_alignment(rng):
    pts = rng.normal(size=(300, 3))
    res = icp_refine(pts, pts)
    assert res.rms == 0.0
    assert res.iterations <= 2
    np.testing.assert_allclose(res.rotation_matrix, np.eye(3), atol=1e-12)


def test_empty_cloud(rng):
    with pytest.raises(EmptyCloudError):
        icp_refine(np.empty((0, 3)), rng.normal(size=(3, 3)))


def _surface(seed, n=1500):
    return make_pair(PairSpec(SurfaceSpec(Shape.WAVY_SHEET, 500.0, n, seed),
                              RigidMotion(), 1.0, 0.0, seed))[0].points


def _perturbed(truth, diag, rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    delta_rot = RigidMotion.from_matrix(Rotation.from_rotvec(np.radians(2.0) * axis).as_matrix(), (0, 0, 0))
    shift = rng.normal(size=3)
    shift *= 0.02 * diag / np.linalg.norm(shift)
    return compose(truth, compose(delta_rot, RigidMotion(EulerAngles(), tuple(shift))))


def test_recovers_motion_from_perturbed_start(rng):
    for seed in range(3):
        pts = _surface(seed)
        truth = random_motion(rng, 200)
        target = apply_motion(truth, pts)
        diag = bounding_box(pts).diagonal
        res = icp_refine(pts, target, _perturbed(truth, diag, rng), IcpConfig(200, 1e-12))
        assert np.max(np.abs(res.translation_vector - truth.vector)) < 1e-6
        angle = np.degrees(Rotation.from_matrix(truth.matrix.T @ res.rotation_matrix).magnitude())
        assert angle < 1e-6


def test_rms_never_increases(rng):
    for seed in range(10):
        spec = PairSpec(SurfaceSpec(Shape.WAVY_SHEET, 500.0, 1500, seed),
                        random_motion(rng, 50), 0.6, 1.0, seed)
        src, tgt, truth = make_pair(spec)
        init = compose(truth, RigidMotion(EulerAngles(3, -2, 1), (5.0, -5.0, 2.0)))
        res = icp_refine(src, tgt, init, IcpConfig(correspondence_cutoff=20.0))
        h = res.rms_history
        assert all(b <= a for a, b in zip(h, h[1:]))
        assert len(h) == res.iterations + 1


def test_rotation_matrix_agrees_with_motion(rng):
    pts = _surface(7, 500)
    truth = RigidMotion(EulerAngles(0, 10, 0), (1.0, 2.0, 3.0))
    res = icp_refine(pts, apply_motion(truth, pts), RigidMotion())
    np.testing.assert_allclose(euler_to_matrix(res.motion.rotation), res.rotation_matrix, atol=1e-12)
