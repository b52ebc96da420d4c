"""Hybrid cage + skeleton deformation with synchronized rest and current poses."""

from .coords import (
    JointLocalization,
    MecError,
    MecProblem,
    joint_coords,
    joint_localization,
    mec_project,
    mvc_matrix,
    mvc_weights,
)
from .formats import load_obj, load_rig, load_skel, load_wgt, save_obj, save_rig, save_skel, save_wgt
from .model import (
    ParseError,
    Rig,
    RigError,
    Skeleton,
    TriMesh,
    ValidationError,
    WeightMatrix,
    WeightRole,
    validate_rest_consensus,
)
from .quaternion import RigidTransform, quat_from_axis_angle, quat_multiply, slerp
from .rigs import BUILTIN_RIGS, builtin_rig
from .select import MaxVolSelection, maxvol_select, solve_reduced
from .skinning import (
    CoRData,
    SkinningMethod,
    apply_joint_rotation,
    cor_precompute,
    cor_skin,
    dqs,
    lbs,
    reposition_cors,
)
from .sync import EditDelta, EditKind, SessionConfig, Snapshot, SyncSession, chunk_offsets

__all__ = [
    "BUILTIN_RIGS",
    "CoRData",
    "EditDelta",
    "EditKind",
    "JointLocalization",
    "MaxVolSelection",
    "MecError",
    "MecProblem",
    "ParseError",
    "Rig",
    "RigError",
    "RigidTransform",
    "SessionConfig",
    "Skeleton",
    "SkinningMethod",
    "Snapshot",
    "SyncSession",
    "TriMesh",
    "ValidationError",
    "WeightMatrix",
    "WeightRole",
    "apply_joint_rotation",
    "builtin_rig",
    "chunk_offsets",
    "cor_precompute",
    "cor_skin",
    "dqs",
    "joint_coords",
    "joint_localization",
    "lbs",
    "load_obj",
    "load_rig",
    "load_skel",
    "load_wgt",
    "maxvol_select",
    "mec_project",
    "mvc_matrix",
    "mvc_weights",
    "quat_from_axis_angle",
    "quat_multiply",
    "reposition_cors",
    "save_obj",
    "save_rig",
    "save_skel",
    "save_wgt",
    "slerp",
    "solve_reduced",
    "validate_rest_consensus",
]

__version__ = "0.1.0"
