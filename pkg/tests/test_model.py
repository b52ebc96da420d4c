"""Mesh, skeleton, and weight-matrix validation."""
import numpy as np
import pytest

from cageskel.model import (
    Skeleton,
    TriMesh,
    ValidationError,
    WeightMatrix,
    WeightRole,
    validate_rest_consensus,
)
from cageskel.quaternion import RigidTransform, quat_from_axis_angle

from conftest import cube_mesh, octahedron_mesh, tetra_mesh


def test_closed_meshes_validate(tetra, octahedron, cube):
    tetra.validate("tetra", require_closed=True)
    octahedron.validate("octa", require_closed=True)
    cube.validate("cube", require_closed=True)


def test_open_mesh_rejected(tetra):
    open_mesh = TriMesh(tetra.vertices, tetra.triangles[:-1])
    with pytest.raises(ValidationError, match="boundary edge"):
        open_mesh.validate("open", require_closed=True)


def test_flipped_triangle_rejected(tetra):
    tris = tetra.triangles.copy()
    tris[0] = tris[0][::-1]
    with pytest.raises(ValidationError):
        TriMesh(tetra.vertices, tris).validate("flipped", require_closed=True)


def test_repeated_vertex_in_triangle_rejected():
    verts = np.eye(3)
    with pytest.raises(ValidationError, match="repeats"):
        TriMesh(verts, np.array([[0, 1, 1]])).validate("degenerate")


def test_triangle_areas(tetra):
    areas = tetra.triangle_areas()
    # three unit right triangles plus the slanted face
    np.testing.assert_allclose(np.sort(areas)[:3], 0.5, atol=1e-15)
    assert areas.sum() == pytest.approx(1.5 + np.sqrt(3) / 2, abs=1e-12)


def test_vertex_areas_partition_surface(cube):
    areas = cube.vertex_areas()
    assert np.all(areas > 0)
    assert areas.sum() == pytest.approx(cube.triangle_areas().sum(), rel=1e-12)


def test_winding_number_inside_outside(cube):
    pts = np.array([[0.0, 0, 0], [0.2, -0.3, 0.1], [2.0, 0, 0], [0, 0, -3.0]])
    w = cube.winding_numbers(pts)
    np.testing.assert_allclose(w[:2], 1.0, atol=1e-10)
    np.testing.assert_allclose(w[2:], 0.0, atol=1e-10)


def test_skeleton_topological_order_is_parent_first():
    parents = np.array([-1, 0, 1, 1, -1, 4])
    rest = np.zeros((6, 3))
    skel = Skeleton(rest, parents)
    skel.validate("forest")
    order = skel.topological_order()
    seen = set()
    for j in order:
        p = parents[j]
        assert p == -1 or p in seen
        seen.add(j)
    assert seen == set(range(6))


def test_skeleton_cycle_rejected():
    with pytest.raises(ValidationError, match="cycle"):
        Skeleton(np.zeros((3, 3)), np.array([2, 0, 1])).validate("cyclic")


def test_skeleton_subtree():
    skel = Skeleton(np.zeros((5, 3)), np.array([-1, 0, 0, 1, 1]))
    assert sorted(skel.subtree(1)) == [1, 3, 4]
    assert sorted(skel.subtree(0)) == [0, 1, 2, 3, 4]


def test_current_positions_track_transforms():
    rest = np.array([[0.0, 0, 0], [1, 0, 0]])
    skel = Skeleton(rest, np.array([-1, 0]))
    np.testing.assert_array_equal(skel.current_positions(), rest)
    rot = quat_from_axis_angle([0, 0, 1], np.pi / 2)
    skel.transforms[1] = RigidTransform(rot, np.zeros(3))
    np.testing.assert_allclose(skel.current_positions()[1], [0, 1, 0],
                               atol=1e-15)


def test_weight_rows_must_sum_to_one():
    rows = np.array([[0.5, 0.3]])
    with pytest.raises(ValidationError, match="sums to"):
        WeightMatrix.from_rows(rows, WeightRole.SKIN_WEIGHTS).validate("w")


def test_negative_weights_rejected_for_skin_only():
    rows = np.array([[1.5, -0.5]])
    with pytest.raises(ValidationError, match="negative"):
        WeightMatrix.from_rows(rows, WeightRole.SKIN_WEIGHTS).validate("w")
    # generalized barycentric rows may go negative
    WeightMatrix.from_rows(rows, WeightRole.CAGE_COORDS).validate("c")


def test_rest_consensus_small_on_builtin(bar_rig):
    from cageskel.coords import mvc_matrix

    phi = mvc_matrix(bar_rig.skin, bar_rig.cage)
    dev = validate_rest_consensus(bar_rig, phi)
    assert dev <= 1e-10 * bar_rig.skin.bbox_diagonal()


def test_mesh_helpers_from_conftest_agree():
    # the module-level factories feed other test files; keep them honest
    assert tetra_mesh().n_triangles == 4
    assert octahedron_mesh().n_vertices == 6
    assert cube_mesh(2.0).bbox_diagonal() == pytest.approx(4 * np.sqrt(3))
