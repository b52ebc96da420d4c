"""Procedurally generated example rigs used by tests, the CLI, and demos.

Every builder returns a fully validated rig: closed manifold skin and cage,
a joint forest strictly inside the skin, and row-stochastic weights. The
constructions are deterministic.
"""
from __future__ import annotations

import numpy as np

from .model import Rig, Skeleton, TriMesh, ValidationError, WeightMatrix, WeightRole


def _ring_points(profile: str, radius: float, m: int) -> np.ndarray:
    """Cross-section points in the yz plane, counterclockwise from +y."""
    if profile == "circle":
        ang = 2.0 * np.pi * np.arange(m) / m
        return np.stack([np.cos(ang), np.sin(ang)], axis=1) * radius
    if profile == "square":
        if m % 4 != 0:
            raise ValidationError("square profile needs a multiple of four points")
        per_side = m // 4
        t = np.arange(per_side) / per_side
        side = np.stack([np.full(per_side, 1.0), 2.0 * t - 1.0], axis=1)
        rot90 = np.array([[0.0, -1.0], [1.0, 0.0]])
        pts = [side]
        for _ in range(3):
            pts.append(pts[-1] @ rot90.T)
        return np.concatenate(pts) * radius
    raise ValidationError(f"unknown profile {profile!r}")


def tube_mesh(length: float, radius, m: int, n_rings: int, profile: str = "circle",
              caps: str = "center-center") -> TriMesh:
    """Closed tube along +x with ``n_rings`` cross sections of ``m`` points.

    ``radius`` may be a callable of the axial fraction in [0, 1]. ``caps``
    chooses per end between a center-vertex fan and a fan anchored at the
    ring's first vertex ("center" / "vertex", dash separated, start-end).
    """
    xs = np.linspace(0.0, length, n_rings)
    verts = []
    for i, x in enumerate(xs):
        r = radius(xs[i] / length) if callable(radius) else radius
        ring = _ring_points(profile, r, m)
        verts.append(np.column_stack([np.full(m, x), ring[:, 0], ring[:, 1]]))
    verts = np.concatenate(verts)
    tris = []
    for i in range(n_rings - 1):
        for k in range(m):
            a = i * m + k
            b = i * m + (k + 1) % m
            c = (i + 1) * m + (k + 1) % m
            d = (i + 1) * m + k
            tris.append([a, c, b])
            tris.append([a, d, c])

    start_cap, end_cap = caps.split("-")
    extra = []
    if start_cap == "center":
        cidx = len(verts) + len(extra)
        extra.append([0.0, 0.0, 0.0])
        for k in range(m):
            tris.append([cidx, k, (k + 1) % m])
    else:
        for k in range(1, m - 1):
            tris.append([0, k, k + 1])
    base = (n_rings - 1) * m
    if end_cap == "center":
        cidx = len(verts) + len(extra)
        extra.append([length, 0.0, 0.0])
        for k in range(m):
            tris.append([cidx, base + (k + 1) % m, base + k])
    else:
        for k in range(1, m - 1):
            tris.append([base, base + k + 1, base + k])
    if extra:
        verts = np.concatenate([verts, np.array(extra)])
    tris = np.array(tris, dtype=np.int32)
    # Normalize to outward orientation so winding numbers read +1 inside.
    volume = np.einsum(
        "ij,ij->i", verts[tris[:, 0]], np.cross(verts[tris[:, 1]], verts[tris[:, 2]])
    ).sum() / 6.0
    if volume < 0.0:
        tris = tris[:, [0, 2, 1]]
    mesh = TriMesh(verts, tris)
    mesh.validate("tube", require_closed=True)
    return mesh


def icosphere(subdivisions: int, radii=(1.0, 1.0, 1.0)) -> TriMesh:
    """Subdivided icosahedron scaled per axis; deterministic vertex order."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    vlist = [v for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key in cache:
                return cache[key]
            mid = vlist[a] + vlist[b]
            mid = mid / np.linalg.norm(mid)
            vlist.append(mid)
            cache[key] = len(vlist) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new_faces, dtype=np.int64)
    verts = np.array(vlist) * np.asarray(radii)[None, :]
    mesh = TriMesh(verts, faces.astype(np.int32))
    mesh.validate("icosphere", require_closed=True)
    return mesh


def _chain_skeleton(xs: np.ndarray) -> Skeleton:
    s = xs.shape[0]
    positions = np.column_stack([xs, np.zeros(s), np.zeros(s)])
    parents = np.arange(-1, s - 1, dtype=np.int32)
    return Skeleton(positions, parents)


def _tent_weights(x: np.ndarray, joint_x: np.ndarray) -> np.ndarray:
    """Piecewise-linear partition of unity over a joint chain.

    Vertices before the first joint bind rigidly to it, likewise after the
    last; in between, weight ramps linearly between consecutive joints.
    """
    s = joint_x.shape[0]
    w = np.zeros((x.shape[0], s))
    seg = np.clip(np.searchsorted(joint_x, x) - 1, 0, s - 2)
    x0 = joint_x[seg]
    x1 = joint_x[seg + 1]
    t = np.clip((x - x0) / (x1 - x0), 0.0, 1.0)
    rows = np.arange(x.shape[0])
    w[rows, seg] = 1.0 - t
    w[rows, seg + 1] += t
    return w


def bar_rig() -> Rig:
    """Two-joint square bar; half the bar bends rigidly about the middle."""
    skin = tube_mesh(2.0, 0.25, 16, 17, profile="square", caps="center-center")
    skeleton = Skeleton(
        np.array([[0.05, 0.0, 0.0], [1.0, 0.0, 0.0]]),
        np.array([-1, 0], dtype=np.int32),
        names=["base", "mid"],
    )
    x = skin.vertices[:, 0]
    # rigid outside the blend band, linear ramp inside it
    t = np.clip((x - 0.75) / 0.5, 0.0, 1.0)
    w = np.column_stack([1.0 - t, t])
    weights = WeightMatrix.from_rows(w, WeightRole.SKIN_WEIGHTS)
    cage = tube_mesh(2.6, 0.45, 4, 8, profile="square", caps="vertex-vertex")
    cage = TriMesh(cage.vertices + np.array([-0.3, 0.0, 0.0]), cage.triangles)
    rig = Rig(skin, skeleton, weights, cage)
    rig.validate()
    _check_containment(rig)
    return rig


def arm_rig() -> Rig:
    """Tapered 2089-vertex tube with a 24-joint chain and a 28-handle cage."""
    skin = tube_mesh(
        2.0, lambda t: 0.22 * (1.0 - 0.25 * t), 18, 116, profile="circle",
        caps="center-vertex",
    )
    joint_x = np.linspace(0.04, 1.96, 24)
    skeleton = _chain_skeleton(joint_x)
    weights = WeightMatrix.from_rows(
        _tent_weights(skin.vertices[:, 0], joint_x), WeightRole.SKIN_WEIGHTS
    )
    cage = tube_mesh(2.5, 0.45, 4, 7, profile="square", caps="vertex-vertex")
    cage = TriMesh(cage.vertices + np.array([-0.25, 0.0, 0.0]), cage.triangles)
    rig = Rig(skin, skeleton, weights, cage)
    rig.validate()
    _check_containment(rig)
    return rig


def large_rig() -> Rig:
    """Stress-test scale: about 6.5k vertices, 64 joints, 104 cage handles."""
    skin = tube_mesh(
        4.0, lambda t: 0.3 * (1.0 - 0.2 * np.sin(np.pi * t)), 36, 182,
        profile="circle", caps="center-center",
    )
    joint_x = np.linspace(0.05, 3.95, 64)
    skeleton = _chain_skeleton(joint_x)
    weights = WeightMatrix.from_rows(
        _tent_weights(skin.vertices[:, 0], joint_x), WeightRole.SKIN_WEIGHTS
    )
    cage = tube_mesh(4.6, 0.5, 4, 26, profile="square", caps="vertex-vertex")
    cage = TriMesh(cage.vertices + np.array([-0.3, 0.0, 0.0]), cage.triangles)
    rig = Rig(skin, skeleton, weights, cage)
    rig.validate()
    _check_containment(rig)
    return rig


def biped_rig() -> Rig:
    """Toy biped: ellipsoid skin over an 11-joint tree, soft weights."""
    skin = icosphere(3, radii=(0.38, 0.85, 0.30))
    joints = np.array(
        [
            [0.00, -0.05, 0.00],  # pelvis
            [0.00, 0.25, 0.00],  # spine
            [0.00, 0.55, 0.00],  # head
            [-0.16, 0.32, 0.00],  # l_shoulder
            [-0.26, -0.02, 0.00],  # l_hand
            [0.16, 0.32, 0.00],  # r_shoulder
            [0.26, -0.02, 0.00],  # r_hand
            [-0.12, -0.22, 0.00],  # l_hip
            [-0.17, -0.65, 0.00],  # l_foot
            [0.12, -0.22, 0.00],  # r_hip
            [0.17, -0.65, 0.00],  # r_foot
        ]
    )
    parents = np.array([-1, 0, 1, 1, 3, 1, 5, 0, 7, 0, 9], dtype=np.int32)
    names = [
        "pelvis", "spine", "head", "l_shoulder", "l_hand", "r_shoulder",
        "r_hand", "l_hip", "l_foot", "r_hip", "r_foot",
    ]
    skeleton = Skeleton(joints, parents, names=names)

    # Influence geometry per joint: segments toward the children, or the
    # articulation itself for leaves. Soft inverse-exponential falloff.
    children = skeleton.children_lists()
    v = skin.vertices
    d2 = np.empty((v.shape[0], skeleton.n_joints))
    for j in range(skeleton.n_joints):
        segs = [(joints[j], joints[c]) for c in children[j]] or [(joints[j], joints[j])]
        best = np.full(v.shape[0], np.inf)
        for a, b in segs:
            ab = b - a
            denom = float(ab @ ab)
            t = np.clip((v - a) @ ab / denom, 0.0, 1.0) if denom > 0 else np.zeros(v.shape[0])
            closest = a + t[:, None] * ab
            best = np.minimum(best, np.einsum("ij,ij->i", v - closest, v - closest))
        d2[:, j] = best
    w = np.exp(-d2 / (0.18 ** 2))
    w /= w.sum(axis=1)[:, None]
    weights = WeightMatrix.from_rows(w, WeightRole.SKIN_WEIGHTS)

    cage = icosphere(1, radii=(0.60, 1.15, 0.50))
    rig = Rig(skin, skeleton, weights, cage)
    rig.validate()
    _check_containment(rig)
    return rig


def _check_containment(rig: Rig) -> None:
    """Joints must sit strictly inside the skin, the skin inside the cage."""
    wj = rig.skin.winding_numbers(rig.skeleton.rest_positions)
    if (np.abs(wj - 1.0) > 1e-6).any():
        raise ValidationError("a joint lies outside the skin")
    ws = rig.cage.winding_numbers(rig.skin.vertices)
    if (np.abs(ws - 1.0) > 1e-6).any():
        raise ValidationError("a skin vertex lies outside the cage")


BUILTIN_RIGS = {
    "bar": bar_rig,
    "arm": arm_rig,
    "biped": biped_rig,
    "large": large_rig,
}


def builtin_rig(name: str) -> Rig:
    try:
        builder = BUILTIN_RIGS[name]
    except KeyError:
        raise ValidationError(
            f"unknown rig {name!r}, available: {', '.join(sorted(BUILTIN_RIGS))}"
        ) from None
    return builder()
