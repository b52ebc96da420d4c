"""Skinning backends and forward-kinematic rotation edits.

Three deformers over the same weight matrix: linear blend, dual quaternion
blend, and blending about per-vertex optimized rotation centers. All accept
the skeleton's per-joint rigid transforms and return new vertex positions.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import Skeleton, TriMesh, ValidationError, WeightMatrix
from .quaternion import RigidTransform, quat_multiply, quat_normalize, quats_to_matrices

# Below this blended rotation norm the dual quaternion blend is considered
# degenerate and the affected vertices fall back to the linear blend.
DQ_DEGENERATE_NORM = 1e-12

# Width of the weight-similarity kernel used for rotation centers.
DEFAULT_SIGMA = 0.1


class SkinningMethod(enum.Enum):
    LBS = "lbs"
    DQS = "dqs"
    COR = "cor"


def _transform_arrays(transforms: list[RigidTransform]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    quats = np.stack([t.rotation for t in transforms])
    trans = np.stack([t.translation for t in transforms])
    return quats, trans, quats_to_matrices(quats)


def apply_joint_rotation(skeleton: Skeleton, joint: int, rotation: np.ndarray) -> None:
    """Compose a rotation about joint ``joint``'s current articulation.

    The rotation is applied to the joint's own transform and every
    descendant's; ancestors are untouched, so the articulation itself stays
    fixed and the skeleton stays attached.
    """
    if not (0 <= joint < skeleton.n_joints):
        raise ValidationError(f"joint index {joint} out of range")
    rotation = quat_normalize(np.asarray(rotation, dtype=np.float64))
    pivot = skeleton.transforms[joint].apply(skeleton.rest_positions[joint])
    for k in skeleton.subtree(joint):
        skeleton.transforms[k] = skeleton.transforms[k].rotated_about(rotation, pivot)


def lbs_blend(weights: WeightMatrix | np.ndarray,
              transforms: list[RigidTransform]) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex blended rotation matrices and translations.

    Returns ``(R, t)`` with ``R`` of shape (n, 3, 3) and ``t`` of shape
    (n, 3); a skinned vertex is ``R[i] @ v_i + t[i]``.
    """
    w = weights.matrix if isinstance(weights, WeightMatrix) else weights
    _, trans, mats = _transform_arrays(transforms)
    rot = (w @ mats.reshape(-1, 9)).reshape(-1, 3, 3)
    t = w @ trans
    return rot, t


def lbs(rest: np.ndarray, weights: WeightMatrix | np.ndarray,
        transforms: list[RigidTransform]) -> np.ndarray:
    """Linear blend skinning of the rest positions."""
    rot, t = lbs_blend(weights, transforms)
    return np.einsum("iab,ib->ia", rot, np.asarray(rest, dtype=np.float64)) + t


def _signed_quats(weights_dense: np.ndarray, quats: np.ndarray) -> np.ndarray:
    """Antipodality-corrected per-vertex sign matrix for quaternion blending.

    Every joint quaternion is flipped to the hemisphere of the vertex's
    highest-weight joint (ties resolved to the lowest joint index by argmax).
    """
    pivot = np.argmax(weights_dense, axis=1)
    dots = quats @ quats.T
    signs = np.where(dots[pivot] < 0.0, -1.0, 1.0)  # (n, s)
    return signs


def _dq_parts(transforms: list[RigidTransform]) -> tuple[np.ndarray, np.ndarray]:
    quats, trans, _ = _transform_arrays(transforms)
    dual = np.empty_like(quats)
    for j in range(quats.shape[0]):
        t = trans[j]
        dual[j] = 0.5 * quat_multiply(np.array([0.0, t[0], t[1], t[2]]), quats[j])
    return quats, dual


def dqs(rest: np.ndarray, weights: WeightMatrix | np.ndarray,
        transforms: list[RigidTransform]) -> np.ndarray:
    """Dual quaternion skinning with per-vertex antipodality correction.

    Vertices whose blended rotation part collapses below
    ``DQ_DEGENERATE_NORM`` are skinned by the linear blend instead.
    """
    rest = np.asarray(rest, dtype=np.float64)
    wd = weights.toarray() if isinstance(weights, WeightMatrix) else np.asarray(weights)
    qr, qd = _dq_parts(transforms)
    signs = _signed_quats(wd, qr)
    br = (wd * signs) @ qr  # (n, 4)
    bd = (wd * signs) @ qd
    norm = np.linalg.norm(br, axis=1)

    degenerate = norm < DQ_DEGENERATE_NORM
    safe = np.maximum(norm, DQ_DEGENERATE_NORM)
    cr = br / safe[:, None]
    cd = bd / safe[:, None]

    rot = quats_to_matrices(cr)
    out = np.einsum("iab,ib->ia", rot, rest)
    # translation = 2 * vector part of (cd * conj(cr))
    w0, x0, y0, z0 = cd[:, 0], cd[:, 1], cd[:, 2], cd[:, 3]
    w1, x1, y1, z1 = cr[:, 0], -cr[:, 1], -cr[:, 2], -cr[:, 3]
    out[:, 0] += 2.0 * (w0 * x1 + x0 * w1 + y0 * z1 - z0 * y1)
    out[:, 1] += 2.0 * (w0 * y1 - x0 * z1 + y0 * w1 + z0 * x1)
    out[:, 2] += 2.0 * (w0 * z1 + x0 * y1 - y0 * x1 + z0 * w1)

    if degenerate.any():
        out[degenerate] = lbs(rest, wd, transforms)[degenerate]
    return out


def rotation_blend(weights: WeightMatrix | np.ndarray,
                   transforms: list[RigidTransform]) -> np.ndarray:
    """Rotation part of the dual quaternion blend, one matrix per vertex."""
    wd = weights.toarray() if isinstance(weights, WeightMatrix) else np.asarray(weights)
    quats, _, _ = _transform_arrays(transforms)
    signs = _signed_quats(wd, quats)
    br = (wd * signs) @ quats
    norm = np.linalg.norm(br, axis=1)
    if (norm < DQ_DEGENERATE_NORM).any():
        raise ValidationError("degenerate quaternion blend in rotation-center skinning")
    return quats_to_matrices(br / norm[:, None])


@dataclass
class CoRData:
    """Precomputed rotation centers and their cage binding.

    ``lam`` maps cage rest vertices straight to centers, so centers follow
    rest-cage edits by one multiplication.
    """

    cors: np.ndarray  # (n, 3)
    lam: np.ndarray  # (n, c)
    sigma: float


def _similarity_block(wd: np.ndarray, rows: np.ndarray, supports: list[np.ndarray],
                      sigma: float) -> np.ndarray:
    """Weight-similarity kernel values between ``rows`` and all vertices.

    Only joint pairs with support on both sides contribute, which keeps the
    cost near (nnz)^2 instead of n^2 s^2.
    """
    n, s = wd.shape
    block = np.zeros((rows.shape[0], n))
    pos_in_block = np.full(n, -1, dtype=np.int64)
    pos_in_block[rows] = np.arange(rows.shape[0])
    inv_sig2 = 1.0 / (sigma * sigma)
    for j in range(s):
        pj = supports[j]
        ii = pj[pos_in_block[pj] >= 0]
        if ii.size == 0:
            continue
        bi = pos_in_block[ii]
        for k in range(s):
            if k == j:
                continue
            vk = supports[k]
            if vk.size == 0:
                continue
            a = wd[ii, j][:, None] * wd[vk, k][None, :]
            bkj = wd[ii, k][:, None] * wd[vk, j][None, :]
            block[np.ix_(bi, vk)] += a * np.exp(-((a - bkj) ** 2) * inv_sig2)
    return block


def cor_precompute(skin: TriMesh, weights: WeightMatrix, phi: WeightMatrix,
                   sigma: float = DEFAULT_SIGMA) -> CoRData:
    """Optimized rotation centers and their rest-cage dependence.

    Each center is the similarity-weighted area average of the skin; the
    same normalized masses composed with the skin's cage coordinates give
    the map from cage rest vertices to centers. Vertices with no similarity
    mass anywhere keep themselves as center.
    """
    wd = weights.toarray()
    n = wd.shape[0]
    if skin.n_vertices != n:
        raise ValidationError("weights must cover every skin vertex")
    areas = skin.vertex_areas()
    phid = phi.toarray()
    supports = [np.flatnonzero(wd[:, j] > 0.0) for j in range(wd.shape[1])]

    cors = np.empty((n, 3))
    lam = np.empty((n, phid.shape[1]))
    block_size = max(1, int(4e6 // max(n, 1)))
    for start in range(0, n, block_size):
        rows = np.arange(start, min(start + block_size, n))
        sim = _similarity_block(wd, rows, supports, sigma)
        masses = sim * areas[None, :]
        totals = masses.sum(axis=1)
        empty = totals <= 0.0
        if empty.any():
            for i in np.flatnonzero(empty):
                masses[i] = 0.0
                masses[i, rows[i]] = 1.0
            totals[empty] = 1.0
        masses /= totals[:, None]
        cors[rows] = masses @ skin.vertices
        lam[rows] = masses @ phid
    return CoRData(cors=cors, lam=lam, sigma=float(sigma))


def reposition_cors(cor: CoRData, cage_rest: np.ndarray) -> np.ndarray:
    """Rotation centers implied by an updated rest cage."""
    return cor.lam @ np.asarray(cage_rest, dtype=np.float64)


def cor_skin(rest: np.ndarray, weights: WeightMatrix | np.ndarray,
             transforms: list[RigidTransform], cor: CoRData) -> np.ndarray:
    """Blend rotations about per-vertex optimized centers.

    The rotation is the quaternion blend's rotation part; the translation
    moves each center by the linear blend, so vertices sharing a weight row
    undergo the identical rigid motion.
    """
    rest = np.asarray(rest, dtype=np.float64)
    wd = weights.toarray() if isinstance(weights, WeightMatrix) else np.asarray(weights)
    rot = rotation_blend(wd, transforms)
    moved = lbs(cor.cors, wd, transforms)
    trans = moved - np.einsum("iab,ib->ia", rot, cor.cors)
    return np.einsum("iab,ib->ia", rot, rest) + trans
