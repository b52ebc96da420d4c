"""Synchronized rest/current state of skin, skeleton, and cage.

The session owns six structures: skin, skeleton, and cage, each in a rest
and a current pose, and keeps them consistent through three operators:

* ``cage_up``   pulls the current cage from the current (or ghost) skin;
* ``skel_up``   cascades a rest-cage change into joints, transforms and skin;
* ``cage_rev``  turns a desired current-cage change into the rest-cage
  change that produces it, by solving the linearized round trip.

All public edits are transactional: a failed edit leaves the session
untouched.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import coords, select, skinning
from .model import Rig, ValidationError
from .quaternion import RigidTransform, quat_normalize, quats_to_matrices
from .skinning import DEFAULT_SIGMA, CoRData, SkinningMethod

# Sessions are refused when the skin deviates from its cage reconstruction
# by more than this fraction of the bounding-box diagonal.
CONSENSUS_LIMIT = 1e-4
# Condition guard for the reverse-edit operator.
OPERATOR_RCOND = 1e-12


class EditKind(enum.Enum):
    SKEL_ROTATE = "skel_rotate"
    CAGE_REST = "cage_rest"
    CAGE_CURR = "cage_curr"


@dataclass
class EditDelta:
    """One incremental user edit.

    Offsets are per-step increments; their magnitude is capped at a fraction
    of the bounding box (see ``SessionConfig.edit_cap``) because the reverse
    cage edit linearizes around the present state.
    """

    kind: EditKind
    joint: int | None = None
    rotation: np.ndarray | None = None
    vertex_indices: np.ndarray | None = None
    offsets: np.ndarray | None = None
    cap: float | None = None

    @classmethod
    def skel_rotate(cls, joint: int, rotation: np.ndarray) -> "EditDelta":
        return cls(EditKind.SKEL_ROTATE, joint=joint,
                   rotation=np.asarray(rotation, dtype=np.float64))

    @classmethod
    def cage_rest(cls, vertex_indices, offsets, cap: float | None = None) -> "EditDelta":
        return cls(EditKind.CAGE_REST,
                   vertex_indices=np.atleast_1d(np.asarray(vertex_indices, dtype=np.int64)),
                   offsets=np.atleast_2d(np.asarray(offsets, dtype=np.float64)), cap=cap)

    @classmethod
    def cage_curr(cls, vertex_indices, offsets, cap: float | None = None) -> "EditDelta":
        return cls(EditKind.CAGE_CURR,
                   vertex_indices=np.atleast_1d(np.asarray(vertex_indices, dtype=np.int64)),
                   offsets=np.atleast_2d(np.asarray(offsets, dtype=np.float64)), cap=cap)


@dataclass
class SessionConfig:
    skinning: SkinningMethod = SkinningMethod.LBS
    # Drive the cage loop from a linear-blend ghost of the selected vertices
    # so the round trip stays exact under the nonlinear skins. Turning this
    # off fits the cage against the displayed skin instead (approximate).
    ghost: bool = True
    s_exp: float = 0.1
    sigma: float = DEFAULT_SIGMA
    maxvol_tau: float = select.DEFAULT_TAU
    # Steady-state audit tolerance, relative to the bounding-box diagonal.
    audit_tol: float = 1e-6
    # Per-step offset cap relative to the bounding-box diagonal; None disables.
    edit_cap: float | None = 0.05
    # Demo/diagnostic switch: skip the joint refit half of the rest cascade.
    refit_joints: bool = True

    def __post_init__(self) -> None:
        # accept the method by value ("dqs") as well as by enum member
        self.skinning = SkinningMethod(self.skinning)


@dataclass
class Snapshot:
    """Immutable copy of the public state after an edit."""

    frame: int
    skin_curr: np.ndarray
    skin_rest: np.ndarray
    cage_rest: np.ndarray
    cage_curr: np.ndarray
    joints_rest: np.ndarray
    joints_curr: np.ndarray


@dataclass
class _StateBackup:
    skin_rest: np.ndarray
    skin_curr: np.ndarray
    cage_rest: np.ndarray
    cage_curr: np.ndarray
    joints_rest: np.ndarray
    transforms: list[RigidTransform]
    cors: np.ndarray | None
    rot_version: int
    frame: int


class SyncSession:
    """Shared deformation state; mutate only through ``edit`` and friends."""

    def __init__(self, rig: Rig, config: SessionConfig | None = None):
        self.config = config or SessionConfig()
        rig.validate()
        self.rig = rig
        self.scale = rig.bbox_diagonal()
        if self.scale == 0.0:
            raise ValidationError("skin bounding box is degenerate")

        self.counters: dict[str, int] = {
            "b_topo_factorizations": 0,
            "maxvol_factorizations": 0,
            "cage_rev_factorizations": 0,
        }
        self.setup_timings: dict[str, float] = {}

        t0 = time.perf_counter()
        self.phi = coords.mvc_matrix(rig.skin.vertices, rig.cage)
        self._phid = self.phi.toarray()
        self.setup_timings["cage_coords_s"] = time.perf_counter() - t0

        from .model import validate_rest_consensus

        deviation = validate_rest_consensus(rig, self.phi)
        if deviation > CONSENSUS_LIMIT * self.scale:
            raise ValidationError(
                f"skin and cage disagree at rest by {deviation:.3e} "
                f"(limit {CONSENSUS_LIMIT * self.scale:.3e}); refusing session"
            )
        self.rest_consensus = deviation

        t0 = time.perf_counter()
        self.selection = select.maxvol_select(self._phid, tau=self.config.maxvol_tau)
        self.counters["maxvol_factorizations"] += 1
        self.setup_timings["cage_up_preprocess_s"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        self.psi = coords.joint_coords(
            rig.skeleton, rig.skin, rig.weights, self.phi, rig.cage, s_exp=self.config.s_exp
        )
        self._psid = self.psi.toarray()
        self.setup_timings["skel_up_preprocess_s"] = time.perf_counter() - t0

        self.skeleton = rig.skeleton.copy()
        self._topo_order = self.skeleton.topological_order()
        self._w = rig.weights.matrix
        self._wd = rig.weights.toarray()

        t0 = time.perf_counter()
        self._b_topo_lu = self._build_b_topo()
        self.counters["b_topo_factorizations"] += 1
        self.setup_timings["b_topo_s"] = time.perf_counter() - t0

        self.cor: CoRData | None = None
        if self.config.skinning is SkinningMethod.COR:
            t0 = time.perf_counter()
            self.cor = skinning.cor_precompute(
                rig.skin, rig.weights, self.phi, sigma=self.config.sigma
            )
            self.setup_timings["cor_preprocess_s"] = time.perf_counter() - t0

        self.skin_rest = rig.skin.vertices.copy()
        self.cage_rest = rig.cage.vertices.copy()
        self.skin_curr = self.skin_rest.copy()
        self.frame = 0
        self._rot_version = 0
        self._cage_rev_cache: tuple[int, tuple] | None = None
        self.cage_curr = np.empty_like(self.cage_rest)
        self.cage_up()

    # -- derived quantities -------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.skin_rest.shape[0]

    @property
    def n_cage(self) -> int:
        return self.cage_rest.shape[0]

    @property
    def n_joints(self) -> int:
        return self.skeleton.n_joints

    def joints_rest(self) -> np.ndarray:
        return self.skeleton.rest_positions.copy()

    def joints_curr(self) -> np.ndarray:
        return self.skeleton.current_positions()

    def _reskin(self) -> np.ndarray:
        method = self.config.skinning
        if method is SkinningMethod.LBS:
            return skinning.lbs(self.skin_rest, self._w, self.skeleton.transforms)
        if method is SkinningMethod.DQS:
            return skinning.dqs(self.skin_rest, self._wd, self.skeleton.transforms)
        assert self.cor is not None
        return skinning.cor_skin(self.skin_rest, self._wd, self.skeleton.transforms, self.cor)

    def _loop_positions(self) -> np.ndarray:
        """Positions the cage loop tracks at the selected vertices."""
        sel = self.selection.indices
        if self.config.skinning is SkinningMethod.LBS or not self.config.ghost:
            return self.skin_curr[sel]
        return skinning.lbs(self.skin_rest[sel], self._wd[sel], self.skeleton.transforms)

    # -- operators ----------------------------------------------------------

    def cage_up(self) -> None:
        """Refit the current cage to the tracked skin positions."""
        self.cage_curr = select.solve_reduced(self.selection, self._loop_positions())

    def skel_up(self) -> None:
        """Cascade the rest cage into joints, transforms, rest skin, and back.

        Joint articulations are refit from their cage coordinates; rotations
        are kept and translations are recomputed hierarchically so every
        previously attained current articulation offset is preserved; then
        centers, rest skin, current skin, and current cage follow.
        """
        if self.config.refit_joints:
            new_a = self._psid @ self.cage_rest
            d_a = new_a - self.skeleton.rest_positions
            mats = quats_to_matrices(np.stack([t.rotation for t in self.skeleton.transforms]))
            d_t = np.zeros((self.n_joints, 3))
            for j in self._topo_order:
                f = int(self.skeleton.parents[j])
                if f < 0:
                    d_t[j] = d_a[j] - mats[j] @ d_a[j]
                else:
                    d_t[j] = d_t[f] - (mats[j] - mats[f]) @ d_a[j]
                tr = self.skeleton.transforms[j]
                self.skeleton.transforms[j] = RigidTransform(tr.rotation, tr.translation + d_t[j])
            self.skeleton.rest_positions = new_a
        if self.cor is not None:
            self.cor.cors = skinning.reposition_cors(self.cor, self.cage_rest)
        self.skin_rest = self._phid @ self.cage_rest
        self.skin_curr = self._reskin()
        self.cage_up()

    def _assemble_cage_rev(self) -> tuple:
        """Factor the linear map from rest-cage changes to current-cage changes."""
        sel = self.selection.indices
        c, s = self.n_cage, self.n_joints
        phis = self._phid[sel]  # (c, c)
        ws = self._wd[sel]  # (c, s)
        mats = quats_to_matrices(np.stack([t.rotation for t in self.skeleton.transforms]))
        rblk = np.einsum("ij,jab->iab", ws, mats)  # blended rotations at selected vertices

        eye = np.eye(3)
        a_r = np.zeros((s, 3, 3))
        for j in range(s):
            f = int(self.skeleton.parents[j])
            a_r[j] = (eye - mats[j]) if f < 0 else (mats[j] - mats[f])
        ar_psi = np.einsum("jab,jk->jakb", a_r, self._psid).reshape(3 * s, 3 * c)
        x = scipy.linalg.lu_solve(self._b_topo_lu, ar_psi)  # (3s, 3c)
        wx = np.einsum("ij,jad->iad", ws, x.reshape(s, 3, 3 * c)).reshape(3 * c, 3 * c)
        rphi = np.einsum("iab,ik->iakb", rblk, phis).reshape(3 * c, 3 * c)
        operator = rphi + wx

        anorm = np.abs(operator).sum(axis=0).max()
        lu = scipy.linalg.lu_factor(operator)
        rcond = _rcond_from_lu(lu[0], anorm)
        if not np.isfinite(rcond) or rcond < OPERATOR_RCOND:
            raise ValidationError(
                f"reverse cage edit is singular at this pose (rcond {rcond:.2e}); edit rejected"
            )
        return lu

    def cage_rev(self, d_cage_curr: np.ndarray) -> np.ndarray:
        """Rest-cage change whose cascade realizes the requested current change."""
        d_cage_curr = np.asarray(d_cage_curr, dtype=np.float64)
        if d_cage_curr.shape != (self.n_cage, 3):
            raise ValidationError(f"expected ({self.n_cage}, 3) offsets")
        if self._cage_rev_cache is None or self._cage_rev_cache[0] != self._rot_version:
            lu = self._assemble_cage_rev()
            self.counters["cage_rev_factorizations"] += 1
            self._cage_rev_cache = (self._rot_version, lu)
        lu = self._cage_rev_cache[1]
        phis = self._phid[self.selection.indices]
        rhs = (phis @ d_cage_curr).reshape(-1)
        return scipy.linalg.lu_solve(lu, rhs).reshape(self.n_cage, 3)

    def _build_b_topo(self) -> tuple:
        """Factor the topology matrix tying translation changes together.

        Root rows read the joint's own translation change; child rows read
        the father's minus the child's. Depends on topology only, so it is
        factored exactly once per session.
        """
        s = self.rig.skeleton.n_joints
        b = np.zeros((3 * s, 3 * s))
        eye = np.eye(3)
        parents = self.rig.skeleton.parents
        for j in range(s):
            f = int(parents[j])
            if f < 0:
                b[3 * j : 3 * j + 3, 3 * j : 3 * j + 3] = eye
            else:
                b[3 * j : 3 * j + 3, 3 * f : 3 * f + 3] = eye
                b[3 * j : 3 * j + 3, 3 * j : 3 * j + 3] = -eye
        self.b_topo = b
        return scipy.linalg.lu_factor(b)

    # -- edits ----------------------------------------------------------------

    def _capture(self) -> _StateBackup:
        return _StateBackup(
            skin_rest=self.skin_rest.copy(),
            skin_curr=self.skin_curr.copy(),
            cage_rest=self.cage_rest.copy(),
            cage_curr=self.cage_curr.copy(),
            joints_rest=self.skeleton.rest_positions.copy(),
            transforms=[t.copy() for t in self.skeleton.transforms],
            cors=None if self.cor is None else self.cor.cors.copy(),
            rot_version=self._rot_version,
            frame=self.frame,
        )

    def _restore(self, backup: _StateBackup) -> None:
        self.skin_rest = backup.skin_rest
        self.skin_curr = backup.skin_curr
        self.cage_rest = backup.cage_rest
        self.cage_curr = backup.cage_curr
        self.skeleton.rest_positions = backup.joints_rest
        self.skeleton.transforms = backup.transforms
        if self.cor is not None:
            self.cor.cors = backup.cors
        self._rot_version = backup.rot_version
        self.frame = backup.frame

    def _validate_delta(self, delta: EditDelta) -> None:
        if delta.kind is EditKind.SKEL_ROTATE:
            if delta.joint is None or delta.rotation is None:
                raise ValidationError("skeleton rotation needs a joint and a quaternion")
            if not (0 <= int(delta.joint) < self.n_joints):
                raise ValidationError(f"joint index {delta.joint} out of range")
            if delta.rotation.shape != (4,):
                raise ValidationError("rotation must be a single quaternion")
            if not np.isfinite(delta.rotation).all() or np.linalg.norm(delta.rotation) == 0.0:
                raise ValidationError("rotation quaternion must be finite and nonzero")
            return
        if delta.vertex_indices is None or delta.offsets is None:
            raise ValidationError("cage edit needs vertex indices and offsets")
        idx = delta.vertex_indices
        off = delta.offsets
        if idx.ndim != 1 or off.shape != (idx.shape[0], 3):
            raise ValidationError("offsets must be one 3-vector per edited cage vertex")
        if (idx < 0).any() or (idx >= self.n_cage).any():
            raise ValidationError("cage vertex index out of range")
        if np.unique(idx).shape[0] != idx.shape[0]:
            raise ValidationError("repeated cage vertex in one edit")
        if not np.isfinite(off).all():
            raise ValidationError("offsets must be finite")
        cap = delta.cap if delta.cap is not None else self.config.edit_cap
        if cap is not None:
            largest = float(np.linalg.norm(off, axis=1).max()) if off.size else 0.0
            if largest > cap * self.scale:
                raise ValidationError(
                    f"edit moves a cage vertex by {largest:.3e}, over the per-step cap "
                    f"{cap * self.scale:.3e}; split the edit into smaller steps"
                )

    def edit(self, delta: EditDelta, audit: bool = False) -> Snapshot:
        """Apply one edit transactionally and return the new public state.

        With ``audit`` the steady-state identities are re-checked after the
        edit and a violation beyond the session tolerance rolls the edit
        back before raising.
        """
        self._validate_delta(delta)
        backup = self._capture()
        try:
            if delta.kind is EditKind.SKEL_ROTATE:
                rot = quat_normalize(delta.rotation)
                skinning.apply_joint_rotation(self.skeleton, int(delta.joint), rot)
                self._rot_version += 1
                self.skin_curr = self._reskin()
                self.cage_up()
            elif delta.kind is EditKind.CAGE_REST:
                self.cage_rest = self.cage_rest.copy()
                self.cage_rest[delta.vertex_indices] += delta.offsets
                self.skel_up()
            else:
                d_curr = np.zeros((self.n_cage, 3))
                d_curr[delta.vertex_indices] = delta.offsets
                d_rest = self.cage_rev(d_curr)
                self.cage_rest = self.cage_rest + d_rest
                self.skel_up()
            if audit:
                self.check_steady_state()
        except Exception:
            self._restore(backup)
            raise
        self.frame += 1
        return self.snapshot()

    def set_pose(self, rotations: np.ndarray, cage_rest: np.ndarray) -> Snapshot:
        """Feed a sampled track state: absolute per-joint rotations + rest cage.

        The skeleton is reset, the rest cage installed and cascaded, then the
        rotations are applied in hierarchy order about the refit
        articulations. Playback therefore never solves a reverse edit.
        """
        rotations = np.asarray(rotations, dtype=np.float64)
        cage_rest = np.asarray(cage_rest, dtype=np.float64)
        if rotations.shape != (self.n_joints, 4):
            raise ValidationError(f"expected ({self.n_joints}, 4) rotations")
        if cage_rest.shape != (self.n_cage, 3):
            raise ValidationError(f"expected ({self.n_cage}, 3) cage positions")
        backup = self._capture()
        try:
            self.skeleton.reset_transforms()
            self._rot_version += 1
            self.cage_rest = cage_rest.copy()
            self.skel_up()
            for j in self._topo_order:
                skinning.apply_joint_rotation(self.skeleton, int(j), rotations[j])
            self.skin_curr = self._reskin()
            self.cage_up()
        except Exception:
            self._restore(backup)
            raise
        self.frame += 1
        return self.snapshot()

    def snapshot(self) -> Snapshot:
        return Snapshot(
            frame=self.frame,
            skin_curr=self.skin_curr.copy(),
            skin_rest=self.skin_rest.copy(),
            cage_rest=self.cage_rest.copy(),
            cage_curr=self.cage_curr.copy(),
            joints_rest=self.joints_rest(),
            joints_curr=self.joints_curr(),
        )

    # -- invariants -----------------------------------------------------------

    def audit(self) -> dict[str, float]:
        """Largest deviation of each steady-state identity, in absolute units."""
        skin_dev = float(np.abs(self._reskin() - self.skin_curr).max())
        cage_dev = float(
            np.abs(select.solve_reduced(self.selection, self._loop_positions()) - self.cage_curr).max()
        )
        joints_dev = float(np.abs(self._psid @ self.cage_rest - self.skeleton.rest_positions).max())
        rest_dev = float(np.abs(self._phid @ self.cage_rest - self.skin_rest).max())
        return {
            "skin_curr": skin_dev,
            "cage_curr": cage_dev,
            "joints_rest": joints_dev,
            "skin_rest": rest_dev,
        }

    def check_steady_state(self) -> None:
        tol = self.config.audit_tol * self.scale
        bad = {k: v for k, v in self.audit().items() if v > tol}
        if bad:
            raise ValidationError(f"steady state violated beyond {tol:.3e}: {bad}")


def _rcond_from_lu(lu_matrix: np.ndarray, anorm: float) -> float:
    """Reciprocal 1-norm condition estimate from an LU factor."""
    try:
        gecon = scipy.linalg.get_lapack_funcs(("gecon",), (lu_matrix,))[0]
        rcond, info = gecon(lu_matrix, anorm, norm="1")
        if info == 0:
            return float(rcond)
    except Exception:
        pass
    # Fallback: direct condition number of the factored matrix is unavailable,
    # report a neutral value and let the solve surface problems.
    return 1.0


def chunk_offsets(vertex_indices: np.ndarray, offsets: np.ndarray, step: float):
    """Split a large cage offset into per-step offsets obeying a cap.

    Yields ``(indices, partial_offsets)`` pairs whose sum is the full edit.
    The rest cascade is linear in the cage, so applying the chunks in
    sequence lands exactly on the same state as one big edit would.
    """
    offsets = np.atleast_2d(np.asarray(offsets, dtype=np.float64))
    vertex_indices = np.atleast_1d(np.asarray(vertex_indices, dtype=np.int64))
    largest = float(np.linalg.norm(offsets, axis=1).max()) if offsets.size else 0.0
    n_steps = max(1, int(np.ceil(largest / step))) if step > 0 else 1
    done = np.zeros_like(offsets)
    for k in range(1, n_steps + 1):
        part = offsets * (k / n_steps) - done
        done += part
        yield vertex_indices, part
