"""Generalized barycentric coordinates binding skin and joints to the cage.

Three constructions live here:

* mean value coordinates of points with respect to a closed triangle mesh,
  built from spherical triangle angles;
* the joint localization map that turns skeleton weights into per-joint
  vertex masses;
* maximum-entropy coordinates, a small convex program solved by damped
  Newton iterations on its dual, used to express joints in cage handles.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Skeleton, TriMesh, ValidationError, WeightMatrix, WeightRole

# Distance (relative to the cage bounding box diagonal) under which a query
# point snaps to a cage vertex instead of evaluating the singular kernel.
SURFACE_EPS_FACTOR = 1e-8
# Dimensionless guards for the on-plane branches of the spherical evaluation.
_ONFACE_EPS = 1e-9
_COPLANAR_EPS = 1e-12

_MVC_CHUNK = 512


class CoordinateError(ValidationError):
    pass


def _mvc_plain_rows(points: np.ndarray, cage: TriMesh) -> np.ndarray:
    """Unnormalized interior-case weights plus flags for special handling.

    Returns ``(weights, vertex_hit, face_hit)``. Rows flagged in either mask
    carry no usable weights and must be finished by the caller.
    """
    verts = cage.vertices
    tris = cage.triangles.astype(np.int64)
    m = points.shape[0]
    c = verts.shape[0]
    eps_vertex = SURFACE_EPS_FACTOR * cage.bbox_diagonal()

    w = np.zeros((m, c))
    vertex_hit = np.full(m, -1, dtype=np.int64)
    face_hit = np.zeros(m, dtype=bool)

    diff = verts[None, :, :] - points[:, None, :]  # (m, c, 3)
    dist = np.linalg.norm(diff, axis=2)
    near = dist < eps_vertex
    has_near = near.any(axis=1)
    if has_near.any():
        vertex_hit[has_near] = np.argmax(near[has_near], axis=1)
    u = diff / np.maximum(dist, 1e-300)[:, :, None]

    u0 = u[:, tris[:, 0], :]
    u1 = u[:, tris[:, 1], :]
    u2 = u[:, tris[:, 2], :]
    d = dist[:, tris]  # (m, t, 3)

    # Arc lengths of the spherical triangle edges, theta_i opposite corner i.
    l0 = np.linalg.norm(u1 - u2, axis=2)
    l1 = np.linalg.norm(u2 - u0, axis=2)
    l2 = np.linalg.norm(u0 - u1, axis=2)
    theta = np.stack(
        [
            2.0 * np.arcsin(np.clip(l0 / 2.0, 0.0, 1.0)),
            2.0 * np.arcsin(np.clip(l1 / 2.0, 0.0, 1.0)),
            2.0 * np.arcsin(np.clip(l2 / 2.0, 0.0, 1.0)),
        ],
        axis=2,
    )  # (m, t, 3)
    h = theta.sum(axis=2) / 2.0
    onface = (np.pi - h) < _ONFACE_EPS  # query lies in a face plane, inside the face
    face_hit |= onface.any(axis=1)

    sin_h = np.sin(h)
    sin_theta = np.sin(theta)
    ci = np.empty_like(theta)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        denom = np.maximum(sin_theta[:, :, j] * sin_theta[:, :, k], 1e-300)
        ci[:, :, i] = (2.0 * sin_h * np.sin(h - theta[:, :, i])) / denom - 1.0
    ci = np.clip(ci, -1.0, 1.0)
    det = np.einsum("ptj,ptj->pt", u0, np.cross(u1, u2))
    si = np.sign(det)[:, :, None] * np.sqrt(np.maximum(1.0 - ci * ci, 0.0))

    # Queries coplanar with a triangle but outside it contribute nothing.
    skip = (np.abs(si) <= _COPLANAR_EPS).any(axis=2) | onface
    wt = np.empty_like(theta)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        denom = d[:, :, i] * sin_theta[:, :, j] * si[:, :, k]
        denom = np.where(np.abs(denom) < 1e-300, 1e-300, denom)
        wt[:, :, i] = (theta[:, :, i] - ci[:, :, j] * theta[:, :, k] - ci[:, :, k] * theta[:, :, j]) / denom
    wt[skip] = 0.0

    rows = np.repeat(np.arange(m)[:, None], tris.shape[0], axis=1)
    for i in range(3):
        np.add.at(w, (rows.ravel(), np.broadcast_to(tris[:, i], rows.shape).ravel()), wt[:, :, i].ravel())
    return w, vertex_hit, face_hit


def _mvc_on_face_row(point: np.ndarray, cage: TriMesh) -> np.ndarray:
    """Barycentric fallback for a query lying on a cage face or edge."""
    verts = cage.vertices
    tris = cage.triangles
    diff = verts - point
    dist = np.linalg.norm(diff, axis=1)
    u = diff / np.maximum(dist, 1e-300)[:, None]
    best = None
    for t_idx in range(tris.shape[0]):
        ia, ib, ic = tris[t_idx]
        ua, ub, uc = u[ia], u[ib], u[ic]
        la = np.linalg.norm(ub - uc)
        lb = np.linalg.norm(uc - ua)
        lc = np.linalg.norm(ua - ub)
        th = 2.0 * np.arcsin(np.clip(np.array([la, lb, lc]) / 2.0, 0.0, 1.0))
        h = th.sum() / 2.0
        if np.pi - h < _ONFACE_EPS:
            best = (t_idx, th)
            break
    if best is None:
        raise CoordinateError("query flagged as on-surface but no containing face found")
    t_idx, th = best
    ia, ib, ic = tris[t_idx]
    row = np.zeros(verts.shape[0])
    row[ia] = np.sin(th[0]) * dist[ib] * dist[ic]
    row[ib] = np.sin(th[1]) * dist[ic] * dist[ia]
    row[ic] = np.sin(th[2]) * dist[ia] * dist[ib]
    total = row[ia] + row[ib] + row[ic]
    if total <= 0.0:
        raise CoordinateError("degenerate barycentric fallback on cage face")
    return row / total


def mvc_rows(points: np.ndarray, cage: TriMesh) -> np.ndarray:
    """Mean value coordinate rows of ``points`` with respect to ``cage``.

    Each row sums to one and reproduces its point from the cage vertices.
    Points within a relative epsilon of a cage vertex get an indicator row;
    points on an edge or face get barycentric coordinates on that simplex.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    c = cage.n_vertices
    out = np.empty((points.shape[0], c))
    for start in range(0, points.shape[0], _MVC_CHUNK):
        chunk = points[start : start + _MVC_CHUNK]
        w, vertex_hit, face_hit = _mvc_plain_rows(chunk, cage)
        sums = w.sum(axis=1)
        plain = (vertex_hit < 0) & ~face_hit
        if (plain & (np.abs(sums) < 1e-300)).any():
            raise CoordinateError("mean value weights vanished, query may be far outside the cage")
        block = np.zeros_like(w)
        block[plain] = w[plain] / sums[plain, None]
        for i in np.flatnonzero(vertex_hit >= 0):
            block[i] = 0.0
            block[i, vertex_hit[i]] = 1.0
        for i in np.flatnonzero(face_hit & (vertex_hit < 0)):
            block[i] = _mvc_on_face_row(chunk[i], cage)
        out[start : start + _MVC_CHUNK] = block
    return out


def mvc_weights(point: np.ndarray, cage: TriMesh) -> np.ndarray:
    """Coordinate row of a single point (see ``mvc_rows``)."""
    return mvc_rows(np.asarray(point, dtype=np.float64)[None, :], cage)[0]


def mvc_matrix(points: np.ndarray | TriMesh, cage: TriMesh,
               role: WeightRole = WeightRole.CAGE_COORDS) -> WeightMatrix:
    """Coordinate matrix of a point set (or a mesh's vertices) in a cage."""
    if isinstance(points, TriMesh):
        points = points.vertices
    cage.validate("cage", require_closed=True)
    rows = mvc_rows(points, cage)
    return WeightMatrix.from_rows(rows, role)


# ---------------------------------------------------------------------------
# joint localization


@dataclass
class JointLocalization:
    """Per-joint vertex masses derived from skin weights.

    ``matrix[j, i] = -1 + w_ij**s + (1 - w_ij)**s`` using the row-stochastic
    collapse of all other joints' weights into ``1 - w_ij``. Zero exactly at
    weights 0 and 1, maximal at 1/2.
    """

    matrix: np.ndarray
    s_exp: float


def joint_localization(weights: WeightMatrix, s_exp: float = 0.1) -> JointLocalization:
    if not (0.0 < s_exp < 1.0):
        raise ValidationError(f"localization exponent must lie in (0, 1), got {s_exp}")
    w = weights.toarray()
    w = np.clip(w, 0.0, 1.0)
    loc = -1.0 + np.power(w, s_exp) + np.power(1.0 - w, s_exp)
    return JointLocalization(loc.T.copy(), float(s_exp))


# ---------------------------------------------------------------------------
# maximum entropy coordinates


@dataclass
class MecProblem:
    """Relative-entropy projection data: prior masses, node positions, target."""

    masses: np.ndarray
    nodes: np.ndarray
    target: np.ndarray


class MecError(CoordinateError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (constraint residual {residual:.3e})")
        self.residual = residual


MEC_TOL = 1e-10
MEC_MAX_ITER = 100
_MEC_MAX_HALVINGS = 30


def mec_project(problem: MecProblem, tol: float = MEC_TOL,
                max_iter: int = MEC_MAX_ITER) -> np.ndarray:
    """Coordinates maximizing entropy relative to the prior masses.

    Solves ``max -sum b_k ln(b_k / m_k)`` subject to the coordinates
    reproducing the target point and summing to one, via Newton iterations
    with step halving on the three-dimensional dual. All returned
    coordinates are strictly positive.
    """
    m = np.asarray(problem.masses, dtype=np.float64)
    nodes = np.asarray(problem.nodes, dtype=np.float64)
    target = np.asarray(problem.target, dtype=np.float64)
    if m.ndim != 1 or nodes.shape != (m.shape[0], 3) or target.shape != (3,):
        raise ValidationError("inconsistent projection problem shapes")
    if m.shape[0] < 4:
        raise ValidationError("need at least four nodes to reproduce a 3D point")
    if (m <= 0.0).any() or not np.isfinite(m).all():
        raise ValidationError("prior masses must be strictly positive and finite")

    # Work in target-centered, scale-normalized coordinates for conditioning.
    y = nodes - target
    scale = float(np.abs(y).max())
    if scale == 0.0:
        raise ValidationError("all nodes coincide with the target")
    y = y / scale
    log_m = np.log(m / m.sum())

    lam = np.zeros(3)

    def dual(lam_):
        expo = log_m - y @ lam_
        if not np.isfinite(expo).all():
            # an unbounded multiplier means the target sits on or outside
            # the hull; report the trial as worthless instead of letting
            # NaN leak into the accept comparisons
            return np.inf, np.full_like(log_m, np.nan)
        shift = expo.max()
        e = np.exp(expo - shift)
        z = e.sum()
        b = e / z
        value = shift + np.log(z)
        return value, b

    value, b = dual(lam)
    residual = float(np.linalg.norm(b @ y))
    for _ in range(max_iter):
        if residual <= tol:
            b = b / b.sum()
            return b
        grad = -(b @ y)
        hess = (y.T * b) @ y - np.outer(b @ y, b @ y)
        # Tiny ridge keeps nearly coplanar node sets solvable.
        hess = hess + (1e-14 * max(np.trace(hess), 1e-300)) * np.eye(3)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            raise MecError("singular dual Hessian, nodes may be coplanar", residual) from None
        alpha = 1.0
        for _ in range(_MEC_MAX_HALVINGS):
            trial_value, trial_b = dual(lam + alpha * step)
            trial_residual = float(np.linalg.norm(trial_b @ y))
            # Near the optimum the dual plateaus at rounding level while the
            # residual still contracts quadratically, so accept either signal.
            if trial_value < value or trial_residual < residual:
                break
            alpha *= 0.5
        else:
            raise MecError("line search failed to reduce the dual", residual)
        lam = lam + alpha * step
        value, b = trial_value, trial_b
        residual = trial_residual
    if residual <= tol:
        return b / b.sum()
    raise MecError("projection did not converge", residual)


# ---------------------------------------------------------------------------
# joint coordinates

# Prior masses are clamped to this fraction of their maximum before the
# entropy projection, keeping the program strictly feasible.
MASS_CLAMP_FACTOR = 1e-8


def joint_coords(skeleton: Skeleton, skin: TriMesh, weights: WeightMatrix,
                 phi: WeightMatrix, cage: TriMesh, s_exp: float = 0.1) -> WeightMatrix:
    """Cage coordinates of every joint articulation.

    Per joint: coordinate row of the articulation with respect to the skin
    mesh, localized by the joint's weight profile, pushed through the skin's
    cage coordinates to get per-handle masses, then entropy-projected so the
    row reproduces the articulation exactly.
    """
    skin.validate("skin", require_closed=True)
    n = skin.n_vertices
    if weights.shape[0] != n or phi.shape[0] != n:
        raise ValidationError("weights and cage coordinates must cover every skin vertex")
    if phi.shape[1] != cage.n_vertices:
        raise ValidationError("cage coordinate columns must match cage vertices")

    joint_rows = mvc_rows(skeleton.rest_positions, skin)
    loc = joint_localization(weights, s_exp=s_exp).matrix
    localized = joint_rows * loc  # (s, n)
    masses = localized @ phi.toarray()  # (s, c)

    psi = np.empty_like(masses)
    for j in range(skeleton.n_joints):
        row = masses[j]
        top = row.max()
        if not np.isfinite(top) or top <= 0.0:
            # Fully rigid weight columns leave no usable mass anywhere; fall
            # back to an uninformative prior so the projection still runs.
            row = np.ones_like(row)
        else:
            row = np.maximum(row, MASS_CLAMP_FACTOR * top)
        row = row / row.sum()
        problem = MecProblem(row, cage.vertices, skeleton.rest_positions[j])
        try:
            psi[j] = mec_project(problem)
        except MecError as err:
            raise MecError(
                f"joint {j} ({skeleton.names[j]}) has no valid cage coordinates: {err}",
                err.residual,
            ) from err
    return WeightMatrix.from_rows(psi, WeightRole.JOINT_COORDS)
