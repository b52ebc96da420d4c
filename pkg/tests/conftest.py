import numpy as np
import pytest

from cageskel.model import TriMesh
from cageskel.rigs import builtin_rig


def tetra_mesh() -> TriMesh:
    """Unit right tetrahedron, outward oriented."""
    verts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    tris = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    return TriMesh(verts, tris)


def octahedron_mesh() -> TriMesh:
    """Regular octahedron; every symmetry maps triangles to triangles."""
    verts = np.array([
        [1.0, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1],
    ])
    tris = np.array([
        [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
        [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
    ])
    return TriMesh(verts, tris)


def cube_mesh(scale: float = 1.0) -> TriMesh:
    """Axis-aligned cube on [-s, s]^3 with a fixed diagonal split."""
    s = scale
    verts = np.array([
        [-s, -s, -s], [s, -s, -s], [s, s, -s], [-s, s, -s],
        [-s, -s, s], [s, -s, s], [s, s, s], [-s, s, s],
    ])
    tris = np.array([
        [0, 2, 1], [0, 3, 2],  # bottom
        [4, 5, 6], [4, 6, 7],  # top
        [0, 1, 5], [0, 5, 4],  # front
        [1, 2, 6], [1, 6, 5],  # right
        [2, 3, 7], [2, 7, 6],  # back
        [3, 0, 4], [3, 4, 7],  # left
    ])
    return TriMesh(verts, tris)


@pytest.fixture(scope="session")
def bar_rig():
    return builtin_rig("bar")


@pytest.fixture(scope="session")
def arm_rig():
    return builtin_rig("arm")


@pytest.fixture(scope="session")
def biped_rig():
    return builtin_rig("biped")


@pytest.fixture
def tetra():
    return tetra_mesh()


@pytest.fixture
def octahedron():
    return octahedron_mesh()


@pytest.fixture
def cube():
    return cube_mesh()
