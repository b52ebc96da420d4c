"""Core value types: triangle meshes, skeletons, weight matrices, rigs.

All positions are float64. Meshes, skeletons and weight matrices are treated
as immutable once validated; the synchronization session keeps its own
mutable copies.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .quaternion import RigidTransform


class RigError(Exception):
    """Base class for modelling and file errors."""


class ParseError(RigError):
    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class ValidationError(RigError):
    pass


# Weight-matrix row sums are maintained to this tolerance internally.
ROW_SUM_TOL = 1e-8
# Text files may carry rows off by this much before renormalization.
ROW_SUM_LOAD_TOL = 1e-5


class WeightRole(Enum):
    SKIN_WEIGHTS = "skin_weights"  # skeleton weights, nonnegative
    CAGE_COORDS = "cage_coords"  # mean value coordinates, may be negative
    JOINT_COORDS = "joint_coords"  # joint cage coordinates, nonnegative


@dataclass
class TriMesh:
    """Triangle mesh with (n, 3) float64 vertices and (m, 3) int32 triangles."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int32)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValidationError("vertices must be an (n, 3) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValidationError("triangles must be an (m, 3) array")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def copy(self) -> "TriMesh":
        return TriMesh(self.vertices.copy(), self.triangles.copy())

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def validate(self, name: str = "mesh", require_closed: bool = False) -> None:
        """Check index ranges, degeneracy, and optionally watertightness.

        The closed check requires every directed edge to appear exactly once
        with its reverse also present, which enforces a 2-manifold boundary
        with consistent triangle orientation. Consistent orientation is what
        the generalized-coordinate constructions rely on.
        """
        if not np.isfinite(self.vertices).all():
            raise ValidationError(f"{name}: vertices contain non-finite values")
        t = self.triangles
        if t.size:
            if t.min() < 0 or t.max() >= self.n_vertices:
                raise ValidationError(f"{name}: triangle index out of range")
            degenerate = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 2] == t[:, 0])
            if degenerate.any():
                bad = int(np.flatnonzero(degenerate)[0])
                raise ValidationError(f"{name}: triangle {bad} repeats a vertex index")
        if require_closed:
            self._validate_closed(name)

    def _validate_closed(self, name: str) -> None:
        t = self.triangles.astype(np.int64)
        if t.size == 0:
            raise ValidationError(f"{name}: empty mesh cannot be closed")
        n = self.n_vertices
        forward = np.concatenate([t[:, 0] * n + t[:, 1], t[:, 1] * n + t[:, 2], t[:, 2] * n + t[:, 0]])
        keys, counts = np.unique(forward, return_counts=True)
        if (counts > 1).any():
            a, b = divmod(int(keys[counts > 1][0]), n)
            raise ValidationError(
                f"{name}: edge ({a}, {b}) used twice in the same direction "
                "(non-manifold or inconsistently oriented)"
            )
        reverse = (keys % n) * n + keys // n
        if not np.isin(reverse, keys).all():
            missing = int(keys[~np.isin(reverse, keys)][0])
            a, b = divmod(missing, n)
            raise ValidationError(f"{name}: boundary edge ({a}, {b}), mesh is not closed")

    def triangle_areas(self) -> np.ndarray:
        v = self.vertices
        t = self.triangles
        cr = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        return 0.5 * np.linalg.norm(cr, axis=1)

    def vertex_areas(self) -> np.ndarray:
        """Mixed Voronoi cell areas per vertex (Meyer et al. style).

        Non-obtuse triangles distribute circumcentric areas by cotangents;
        obtuse ones give half the area to the obtuse corner, a quarter to the
        rest. Degenerate triangles contribute their corners a third each.
        """
        v = self.vertices
        t = self.triangles
        areas = np.zeros(self.n_vertices)
        p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        tri_area = 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)

        def corner(a, b, c):
            # cotangent at corner a and squared length of the opposite edge
            u, w = b - a, c - a
            cross = np.linalg.norm(np.cross(u, w), axis=1)
            cot = np.einsum("ij,ij->i", u, w) / np.maximum(cross, 1e-300)
            opp2 = np.einsum("ij,ij->i", b - c, b - c)
            return cot, opp2

        cot0, e0 = corner(p0, p1, p2)
        cot1, e1 = corner(p1, p2, p0)
        cot2, e2 = corner(p2, p0, p1)
        cots = np.stack([cot0, cot1, cot2], axis=1)
        opp2 = np.stack([e0, e1, e2], axis=1)

        obtuse = cots < 0.0
        any_obtuse = obtuse.any(axis=1)
        flat = tri_area <= 1e-300

        contrib = np.empty((t.shape[0], 3))
        # Voronoi-safe case: corner i gets (|e_j|^2 cot_j + |e_k|^2 cot_k) / 8.
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            contrib[:, i] = (opp2[:, j] * cots[:, j] + opp2[:, k] * cots[:, k]) / 8.0
        # Obtuse case: area/2 at the obtuse corner, area/4 elsewhere.
        ob = np.where(obtuse, 0.5, 0.25) * tri_area[:, None]
        contrib[any_obtuse] = ob[any_obtuse]
        contrib[flat] = (tri_area[flat] / 3.0)[:, None]

        np.add.at(areas, t, contrib)
        return areas

    def winding_numbers(self, points: np.ndarray) -> np.ndarray:
        """Generalized winding number of each query point (1 inside, 0 outside)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        total = np.zeros(points.shape[0])
        v = self.vertices
        t = self.triangles
        chunk = max(1, int(2e6 / max(t.shape[0], 1)))
        for s in range(0, points.shape[0], chunk):
            p = points[s : s + chunk]
            a = v[t[:, 0]][None] - p[:, None]
            b = v[t[:, 1]][None] - p[:, None]
            c = v[t[:, 2]][None] - p[:, None]
            la = np.linalg.norm(a, axis=2)
            lb = np.linalg.norm(b, axis=2)
            lc = np.linalg.norm(c, axis=2)
            det = np.einsum("pij,pij->pi", a, np.cross(b, c))
            denom = (
                la * lb * lc
                + np.einsum("pij,pij->pi", a, b) * lc
                + np.einsum("pij,pij->pi", b, c) * la
                + np.einsum("pij,pij->pi", c, a) * lb
            )
            total[s : s + chunk] = np.arctan2(det, denom).sum(axis=1) / (2.0 * np.pi)
        return total


@dataclass
class Skeleton:
    """Joint forest with rest articulations and per-joint rigid transforms.

    ``parents[j] == -1`` marks a root. One transform per joint; at rest all
    transforms are the identity. The transform of a joint acts on the
    sub-skeleton hanging below it.
    """

    rest_positions: np.ndarray
    parents: np.ndarray
    names: list[str] = field(default_factory=list)
    transforms: list[RigidTransform] = field(default_factory=list)

    def __post_init__(self):
        self.rest_positions = np.ascontiguousarray(self.rest_positions, dtype=np.float64)
        self.parents = np.ascontiguousarray(self.parents, dtype=np.int32)
        s = self.n_joints
        if not self.names:
            self.names = [f"joint{j}" for j in range(s)]
        if not self.transforms:
            self.transforms = [RigidTransform.identity() for _ in range(s)]

    @property
    def n_joints(self) -> int:
        return self.rest_positions.shape[0]

    def copy(self) -> "Skeleton":
        return Skeleton(
            self.rest_positions.copy(),
            self.parents.copy(),
            list(self.names),
            [t.copy() for t in self.transforms],
        )

    def validate(self, name: str = "skeleton") -> None:
        s = self.n_joints
        if self.rest_positions.ndim != 2 or self.rest_positions.shape[1] != 3:
            raise ValidationError(f"{name}: rest positions must be (s, 3)")
        if not np.isfinite(self.rest_positions).all():
            raise ValidationError(f"{name}: non-finite joint position")
        if self.parents.shape != (s,):
            raise ValidationError(f"{name}: parents must have one entry per joint")
        if len(self.names) != s or len(self.transforms) != s:
            raise ValidationError(f"{name}: names/transforms length mismatch")
        if s == 0:
            raise ValidationError(f"{name}: at least one joint required")
        if (self.parents >= s).any() or (self.parents < -1).any():
            raise ValidationError(f"{name}: parent index out of range")
        if (self.parents == np.arange(s)).any():
            raise ValidationError(f"{name}: joint cannot be its own parent")
        # Forest check: walking parent links from any joint must terminate.
        order = self.topological_order()
        if order.shape[0] != s:
            raise ValidationError(f"{name}: parent links contain a cycle")

    def topological_order(self) -> np.ndarray:
        """Joint indices ordered so every parent precedes its children."""
        s = self.n_joints
        order = []
        seen = np.zeros(s, dtype=bool)
        frontier = [j for j in range(s) if self.parents[j] == -1]
        seen[frontier] = True
        children = self.children_lists()
        while frontier:
            j = frontier.pop(0)
            order.append(j)
            for c in children[j]:
                if not seen[c]:
                    seen[c] = True
                    frontier.append(c)
        return np.array(order, dtype=np.int32)

    def children_lists(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n_joints)]
        for j, p in enumerate(self.parents):
            if p >= 0:
                out[p].append(j)
        return out

    def subtree(self, j: int) -> list[int]:
        """Joint j plus all of its descendants."""
        children = self.children_lists()
        stack = [int(j)]
        out = []
        while stack:
            k = stack.pop()
            out.append(k)
            stack.extend(children[k])
        return out

    def current_positions(self) -> np.ndarray:
        """Articulations under the current transforms, a_hat_j = T_j(a_j)."""
        out = np.empty_like(self.rest_positions)
        for j, t in enumerate(self.transforms):
            out[j] = t.apply(self.rest_positions[j])
        return out

    def reset_transforms(self) -> None:
        self.transforms = [RigidTransform.identity() for _ in range(self.n_joints)]


@dataclass
class WeightMatrix:
    """Row-stochastic coordinate matrix with a role tag.

    Rows sum to one within ``ROW_SUM_TOL``. Skin weights and joint
    coordinates are nonnegative; cage coordinates may be negative.
    """

    matrix: sp.csr_matrix
    role: WeightRole

    def __post_init__(self):
        if not sp.issparse(self.matrix):
            self.matrix = sp.csr_matrix(np.asarray(self.matrix, dtype=np.float64))
        self.matrix = self.matrix.tocsr().astype(np.float64)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def validate(self, name: str = "weights") -> None:
        m = self.matrix
        if not np.isfinite(m.data).all():
            raise ValidationError(f"{name}: non-finite weight")
        sums = np.asarray(m.sum(axis=1)).ravel()
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            i = int(bad[0])
            raise ValidationError(f"{name}: row {i} sums to {sums[i]:.9g}, expected 1")
        if self.role is not WeightRole.CAGE_COORDS and m.data.size and m.data.min() < 0.0:
            raise ValidationError(f"{name}: negative entry not allowed for role {self.role.value}")

    @classmethod
    def from_rows(cls, rows: np.ndarray, role: WeightRole) -> "WeightMatrix":
        wm = cls(sp.csr_matrix(np.asarray(rows, dtype=np.float64)), role)
        wm.validate()
        return wm


@dataclass
class Rig:
    """A skin mesh bound to a skeleton by weights and enclosed by a cage."""

    skin: TriMesh
    skeleton: Skeleton
    weights: WeightMatrix
    cage: TriMesh

    def validate(self) -> None:
        self.skin.validate("skin")
        self.cage.validate("cage", require_closed=True)
        self.skeleton.validate("skeleton")
        self.weights.validate("skin weights")
        n, s = self.weights.shape
        if n != self.skin.n_vertices:
            raise ValidationError(
                f"weights have {n} rows but the skin has {self.skin.n_vertices} vertices"
            )
        if s != self.skeleton.n_joints:
            raise ValidationError(
                f"weights have {s} columns but the skeleton has {self.skeleton.n_joints} joints"
            )
        if self.weights.role is not WeightRole.SKIN_WEIGHTS:
            raise ValidationError("rig weights must carry the skin-weights role")

    def bbox_diagonal(self) -> float:
        return self.skin.bbox_diagonal()


def validate_rest_consensus(rig: Rig, phi: WeightMatrix) -> float:
    """Largest distance between skin vertices and their cage reconstruction.

    Returns ``max_i |skin_i - (phi @ cage_vertices)_i|``. Callers refuse to
    build a session when this exceeds 1e-4 of the skin bounding-box diagonal.
    """
    if phi.shape != (rig.skin.n_vertices, rig.cage.n_vertices):
        raise ValidationError(
            f"cage coordinates are {phi.shape}, expected "
            f"({rig.skin.n_vertices}, {rig.cage.n_vertices})"
        )
    recon = phi.matrix @ rig.cage.vertices
    dev = np.linalg.norm(recon - rig.skin.vertices, axis=1)
    return float(dev.max()) if dev.size else 0.0
