"""Quaternion and rigid transform helpers shared by all deformation modules.

Quaternions are stored as (w, x, y, z) float64 arrays of unit norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Unit-norm drift beyond this is treated as a modelling error, not rounding.
UNIT_TOL = 1e-9


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion cannot be normalized")
    return q / n


def quat_is_unit(q: np.ndarray, tol: float = UNIT_TOL) -> bool:
    return abs(float(np.linalg.norm(q)) - 1.0) <= tol


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b, both (w, x, y, z)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValueError("rotation axis must be nonzero")
    half = 0.5 * float(angle)
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) * (axis / n)
    return q


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quats_to_matrices(qs: np.ndarray) -> np.ndarray:
    """Batch of rotation matrices, qs is (m, 4) -> (m, 3, 3)."""
    qs = np.asarray(qs, dtype=np.float64)
    w, x, y, z = qs[:, 0], qs[:, 1], qs[:, 2], qs[:, 3]
    m = np.empty((qs.shape[0], 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors v (..., 3) by unit quaternion q."""
    return np.asarray(v, dtype=np.float64) @ quat_to_matrix(q).T


def slerp(q0: np.ndarray, q1: np.ndarray, t: float) -> np.ndarray:
    """Shortest-arc spherical interpolation between unit quaternions.

    The second key is sign-flipped when its dot product with the first is
    negative, so interpolation never takes the long way around.
    """
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    dot = float(q0 @ q1)
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    dot = min(dot, 1.0)
    if dot > 1.0 - 1e-12:
        # Nearly parallel keys: linear blend avoids 0/0 in the sine ratio.
        return quat_normalize(q0 + t * (q1 - q0))
    theta = np.arccos(dot)
    s = np.sin(theta)
    return (np.sin((1.0 - t) * theta) / s) * q0 + (np.sin(t * theta) / s) * q1


@dataclass
class RigidTransform:
    """Rigid map v -> R(rotation) v + translation."""

    rotation: np.ndarray = field(default_factory=quat_identity)
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if self.rotation.shape != (4,):
            raise ValueError("rotation must be a (w, x, y, z) quaternion")
        if self.translation.shape != (3,):
            raise ValueError("translation must be a 3-vector")
        if not quat_is_unit(self.rotation):
            raise ValueError("rotation quaternion must have unit norm")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    def copy(self) -> "RigidTransform":
        return RigidTransform(self.rotation.copy(), self.translation.copy())

    def matrix3(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=np.float64) @ self.matrix3().T + self.translation

    def is_identity(self, tol: float = 1e-12) -> bool:
        return (
            abs(abs(float(self.rotation[0])) - 1.0) <= tol
            and float(np.abs(self.rotation[1:]).max()) <= tol
            and float(np.abs(self.translation).max()) <= tol
        )

    def rotated_about(self, dq: np.ndarray, pivot: np.ndarray) -> "RigidTransform":
        """Compose an extra rotation dq about a world-space pivot on the left."""
        dq = quat_normalize(dq)
        dr = quat_to_matrix(dq)
        pivot = np.asarray(pivot, dtype=np.float64)
        rot = quat_normalize(quat_multiply(dq, self.rotation))
        tra = dr @ (self.translation - pivot) + pivot
        return RigidTransform(rot, tra)
