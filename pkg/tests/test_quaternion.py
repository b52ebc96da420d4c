"""Quaternion algebra and rigid transform composition."""
import numpy as np
import pytest

from cageskel.quaternion import (
    RigidTransform,
    quat_from_axis_angle,
    quat_identity,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_to_matrix,
    slerp,
)


def unit_quats(rng, n):
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def test_multiply_matches_matrix_composition():
    rng = np.random.default_rng(11)
    for q1, q2 in zip(unit_quats(rng, 25), unit_quats(rng, 25)):
        composed = quat_to_matrix(quat_multiply(q1, q2))
        np.testing.assert_allclose(
            composed, quat_to_matrix(q1) @ quat_to_matrix(q2), atol=1e-14)


def test_rotate_matches_matrix():
    rng = np.random.default_rng(3)
    q = unit_quats(rng, 1)[0]
    v = rng.normal(size=3)
    np.testing.assert_allclose(quat_rotate(q, v), quat_to_matrix(q) @ v,
                               atol=1e-14)


def test_axis_angle_round_trip():
    q = quat_from_axis_angle([0, 0, 2.0], np.pi / 3)
    r = quat_to_matrix(q)
    # rotating (1,0,0) by 60 degrees about z
    np.testing.assert_allclose(r @ [1, 0, 0], [0.5, np.sin(np.pi / 3), 0],
                               atol=1e-15)


def test_to_matrix_is_orthonormal():
    rng = np.random.default_rng(7)
    for q in unit_quats(rng, 10):
        r = quat_to_matrix(q)
        np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-14)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-14)


def test_normalize_rejects_zero():
    with pytest.raises(ValueError):
        quat_normalize(np.zeros(4))


def test_slerp_endpoints_and_midpoint():
    q0 = quat_identity()
    q1 = quat_from_axis_angle([0, 0, 1], np.pi / 2)
    np.testing.assert_allclose(slerp(q0, q1, 0.0), q0, atol=1e-15)
    np.testing.assert_allclose(slerp(q0, q1, 1.0), q1, atol=1e-15)
    mid = slerp(q0, q1, 0.5)
    np.testing.assert_allclose(mid, quat_from_axis_angle([0, 0, 1], np.pi / 4),
                               atol=1e-15)


def test_slerp_takes_shortest_arc():
    # q and -q are the same rotation; interpolation must not swing the
    # long way around when the representative sign flips.
    q0 = quat_from_axis_angle([1, 0, 0], 0.3)
    q1 = quat_from_axis_angle([1, 0, 0], 0.5)
    direct = slerp(q0, q1, 0.5)
    flipped = slerp(q0, -q1, 0.5)
    np.testing.assert_allclose(quat_to_matrix(direct), quat_to_matrix(flipped),
                               atol=1e-14)


def test_rigid_transform_apply_matches_matrix():
    rng = np.random.default_rng(19)
    q = unit_quats(rng, 1)[0]
    t = rng.normal(size=3)
    tf = RigidTransform(q, t)
    pts = rng.normal(size=(8, 3))
    np.testing.assert_allclose(tf.apply(pts), pts @ tf.matrix3().T + t,
                               atol=1e-14)


def test_rotated_about_fixes_pivot():
    rng = np.random.default_rng(23)
    tf = RigidTransform(unit_quats(rng, 1)[0], rng.normal(size=3))
    pivot = rng.normal(size=3)
    dq = quat_from_axis_angle(rng.normal(size=3), 0.7)
    out = tf.rotated_about(dq, pivot)
    # the pivot is a fixed point of the post-rotation
    np.testing.assert_allclose(out.apply(pivot),
                               quat_rotate(dq, tf.apply(pivot) - pivot) + pivot,
                               atol=1e-14)


def test_rigid_transform_requires_unit_quaternion():
    with pytest.raises(ValueError):
        RigidTransform(np.array([2.0, 0, 0, 0]), np.zeros(3))
