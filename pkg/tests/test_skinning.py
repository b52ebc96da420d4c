"""Skinning methods against hand-computed poses and rigidity oracles."""
import numpy as np
import pytest

from cageskel.model import Skeleton, ValidationError, WeightMatrix, WeightRole
from cageskel.quaternion import RigidTransform, quat_from_axis_angle, quat_identity
from cageskel.skinning import (
    apply_joint_rotation,
    cor_precompute,
    cor_skin,
    dqs,
    lbs,
    reposition_cors,
    rotation_blend,
)

from conftest import cube_mesh


def two_chain():
    rest = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    return Skeleton(rest, np.array([-1, 0]), names=["base", "elbow"])


def antipodal_setup():
    """One joint at identity, one rotated half a turn about z at the origin."""
    transforms = [
        RigidTransform(quat_identity(), np.zeros(3)),
        RigidTransform(quat_from_axis_angle([0, 0, 1], np.pi), np.zeros(3)),
    ]
    weights = WeightMatrix.from_rows(np.array([[0.5, 0.5]]),
                                     WeightRole.SKIN_WEIGHTS)
    rest = np.array([[1.0, 0.0, 0.0]])
    return rest, weights, transforms


def test_fk_two_chain_hand_computed():
    skel = two_chain()
    # bend the elbow a quarter turn about z; the subtree pivots at (1,0,0)
    apply_joint_rotation(skel, 1, quat_from_axis_angle([0, 0, 1], np.pi / 2))
    np.testing.assert_allclose(skel.current_positions(),
                               [[0, 0, 0], [1, 0, 0]], atol=1e-15)
    probe = np.array([2.0, 0, 0])  # a point one unit past the elbow
    np.testing.assert_allclose(skel.transforms[1].apply(probe), [1, 1, 0],
                               atol=1e-15)
    # a root turn carries the elbow with it
    apply_joint_rotation(skel, 0, quat_from_axis_angle([0, 0, 1], np.pi / 2))
    np.testing.assert_allclose(skel.current_positions()[1], [0, 1, 0],
                               atol=1e-15)


def test_lbs_antipodal_blend_collapses():
    rest, weights, transforms = antipodal_setup()
    out = lbs(rest, weights, transforms)
    np.testing.assert_allclose(out[0], [0.0, 0.0, 0.0], atol=1e-15)


def test_dqs_antipodal_blend_preserves_norm():
    rest, weights, transforms = antipodal_setup()
    out = dqs(rest, weights, transforms)
    assert np.linalg.norm(out[0]) == pytest.approx(1.0, abs=1e-12)
    # the blended rotation is the half turn's half: a quarter turn
    np.testing.assert_allclose(out[0], [0.0, 1.0, 0.0], atol=1e-12)


def test_dqs_ignores_quaternion_sign():
    rest, weights, transforms = antipodal_setup()
    out1 = dqs(rest, weights, transforms)
    flipped = [RigidTransform(-t.rotation, t.translation) for t in transforms]
    out2 = dqs(rest, weights, flipped)
    np.testing.assert_allclose(out2, out1, atol=1e-14)


def test_degenerate_dq_blend_falls_back_to_lbs():
    # with the sign fix active the blend keeps a positive component along
    # the pivot quaternion, so cancellation needs signed raw rows; the
    # fallback row must match the linear blend instead of amplifying noise
    transforms = [
        RigidTransform(quat_identity(), np.zeros(3)),
        RigidTransform(quat_identity(), np.zeros(3)),
    ]
    raw = np.array([[0.5, -0.5]])
    rest = np.array([[0.3, -0.2, 0.9]])
    out = dqs(rest, raw, transforms)
    np.testing.assert_allclose(out, lbs(rest, raw, transforms), atol=1e-15)
    np.testing.assert_allclose(out, [[0.0, 0.0, 0.0]], atol=1e-15)


def test_all_methods_reproduce_a_common_rigid_motion(bar_rig):
    rng = np.random.default_rng(71)
    q = rng.normal(size=4)
    q = q / np.linalg.norm(q)
    t = rng.normal(size=3)
    motion = RigidTransform(q, t)
    transforms = [motion.copy() for _ in range(bar_rig.skeleton.n_joints)]
    rest = bar_rig.skin.vertices
    expected = motion.apply(rest)
    np.testing.assert_allclose(lbs(rest, bar_rig.weights, transforms),
                               expected, atol=1e-12)
    np.testing.assert_allclose(dqs(rest, bar_rig.weights, transforms),
                               expected, atol=1e-12)
    from cageskel.coords import mvc_matrix
    phi = mvc_matrix(bar_rig.skin, bar_rig.cage)
    cor = cor_precompute(bar_rig.skin, bar_rig.weights, phi)
    np.testing.assert_allclose(cor_skin(rest, bar_rig.weights, transforms, cor),
                               expected, atol=1e-12)


def test_cor_identical_weight_rows_move_rigidly():
    mesh = cube_mesh()
    rows = np.tile([0.5, 0.5], (8, 1))
    weights = WeightMatrix.from_rows(rows, WeightRole.SKIN_WEIGHTS)
    phi = WeightMatrix.from_rows(np.eye(8), WeightRole.CAGE_COORDS)
    cor = cor_precompute(mesh, weights, phi)
    transforms = [
        RigidTransform(quat_identity(), np.zeros(3)),
        RigidTransform(quat_from_axis_angle([0, 1, 0], 0.9),
                       np.array([0.4, 0, 0])),
    ]
    out = cor_skin(mesh.vertices, weights, transforms, cor)
    # identical rows share one center and one blended rotation, so all
    # pairwise distances survive
    d0 = np.linalg.norm(mesh.vertices[:, None] - mesh.vertices[None], axis=2)
    d1 = np.linalg.norm(out[:, None] - out[None], axis=2)
    np.testing.assert_allclose(d1, d0, atol=1e-12)


def test_cor_reposition_follows_cage():
    mesh = cube_mesh()
    rows = np.tile([0.5, 0.5], (8, 1))
    weights = WeightMatrix.from_rows(rows, WeightRole.SKIN_WEIGHTS)
    phi = WeightMatrix.from_rows(np.eye(8), WeightRole.CAGE_COORDS)
    cor = cor_precompute(mesh, weights, phi)
    np.testing.assert_allclose(cor.lam @ mesh.vertices, cor.cors, atol=1e-12)
    shifted = reposition_cors(cor, mesh.vertices + [1.0, -2.0, 0.5])
    np.testing.assert_allclose(shifted, cor.cors + [1.0, -2.0, 0.5],
                               atol=1e-12)
    doubled = reposition_cors(cor, 2.0 * mesh.vertices)
    np.testing.assert_allclose(doubled, 2.0 * cor.cors, atol=1e-12)


def test_rotation_blend_requires_nondegenerate_input():
    transforms = [
        RigidTransform(quat_identity(), np.zeros(3)),
        RigidTransform(quat_identity(), np.zeros(3)),
    ]
    with pytest.raises(ValidationError, match="degenerate"):
        rotation_blend(np.array([[0.5, -0.5]]), transforms)


def test_apply_joint_rotation_range_check():
    skel = two_chain()
    with pytest.raises(ValidationError):
        apply_joint_rotation(skel, 5, quat_identity())
