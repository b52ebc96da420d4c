"""Joint localization and joint coordinates."""
import numpy as np
import pytest

from cageskel.coords import joint_coords, joint_localization, mvc_matrix
from cageskel.model import ValidationError, WeightMatrix, WeightRole


def test_localization_peaks_at_half_influence():
    rows = np.array([[0.5, 0.5]])
    w = WeightMatrix.from_rows(rows, WeightRole.SKIN_WEIGHTS)
    loc = joint_localization(w, s_exp=0.1)
    expected = -1.0 + 2.0 * 0.5 ** 0.1
    np.testing.assert_allclose(loc.matrix[0], expected, atol=1e-15)


def test_localization_vanishes_at_full_and_zero_influence():
    rows = np.array([[1.0, 0.0], [0.0, 1.0]])
    w = WeightMatrix.from_rows(rows, WeightRole.SKIN_WEIGHTS)
    loc = joint_localization(w)
    np.testing.assert_allclose(loc.matrix, 0.0, atol=1e-14)


def test_localization_symmetric_and_bounded():
    omega = np.linspace(0.0, 1.0, 101)
    rows = np.column_stack([omega, 1.0 - omega])
    w = WeightMatrix.from_rows(rows, WeightRole.SKIN_WEIGHTS)
    loc = joint_localization(w, s_exp=0.1)
    vals = loc.matrix[0]
    np.testing.assert_allclose(vals, loc.matrix[1][::-1], atol=1e-12)
    assert np.all(vals >= -1e-15) and np.all(vals <= 1.0)
    # rises toward the 0.5 peak from both sides
    mid = 50
    assert np.all(np.diff(vals[:mid + 1]) > -1e-12)
    assert np.all(np.diff(vals[mid:]) < 1e-12)


def test_localization_requires_valid_exponent():
    rows = np.array([[0.5, 0.5]])
    w = WeightMatrix.from_rows(rows, WeightRole.SKIN_WEIGHTS)
    with pytest.raises(ValidationError):
        joint_localization(w, s_exp=0.0)
    with pytest.raises(ValidationError):
        joint_localization(w, s_exp=1.0)


def test_joint_coords_reproduce_articulations(bar_rig):
    phi = mvc_matrix(bar_rig.skin, bar_rig.cage)
    psi = joint_coords(bar_rig.skeleton, bar_rig.skin, bar_rig.weights,
                       phi, bar_rig.cage)
    assert psi.shape == (bar_rig.skeleton.n_joints, bar_rig.cage.n_vertices)
    dense = psi.toarray()
    np.testing.assert_allclose(dense.sum(axis=1), 1.0, atol=1e-12)
    scale = bar_rig.skin.bbox_diagonal()
    rebuilt = dense @ bar_rig.cage.vertices
    assert np.abs(rebuilt - bar_rig.skeleton.rest_positions).max() <= 1e-8 * scale
    # entropy projection keeps the rows strictly positive
    assert dense.min() > 0


def test_joint_coords_follow_cage_translation(bar_rig):
    phi = mvc_matrix(bar_rig.skin, bar_rig.cage)
    psi = joint_coords(bar_rig.skeleton, bar_rig.skin, bar_rig.weights,
                       phi, bar_rig.cage).toarray()
    shift = np.array([0.3, -1.2, 0.05])
    moved = psi @ (bar_rig.cage.vertices + shift)
    np.testing.assert_allclose(
        moved, bar_rig.skeleton.rest_positions + shift, atol=1e-9)
