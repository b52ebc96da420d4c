"""Plain-text file formats: OBJ subset, .skel skeletons, .wgt sparse weights.

Floats are written with 17 significant digits so save/load round-trips are
bit exact for float64 values.
"""
from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from .model import ParseError, Rig, Skeleton, TriMesh, ValidationError, WeightMatrix, WeightRole

FLOAT_FMT = "%.17g"


def _fmt(x: float) -> str:
    return FLOAT_FMT % float(x)


def _parse_float(tok: str, path: str, line: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(path, line, f"bad {what} value {tok!r}") from None


def _parse_int(tok: str, path: str, line: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(path, line, f"bad {what} index {tok!r}") from None


def load_obj(path: str) -> TriMesh:
    """Read the v/f subset of Wavefront OBJ.

    Faces with more than three corners are fan-triangulated in file order.
    Texture and normal references after a slash are ignored. Unknown
    keywords are skipped.
    """
    verts: list[list[float]] = []
    tris: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            key = parts[0]
            if key == "v":
                if len(parts) < 4:
                    raise ParseError(path, ln, "vertex needs three coordinates")
                verts.append([_parse_float(t, path, ln, "coordinate") for t in parts[1:4]])
            elif key == "f":
                if len(parts) < 4:
                    raise ParseError(path, ln, "face needs at least three vertices")
                idx = []
                for tok in parts[1:]:
                    head = tok.split("/")[0]
                    i = _parse_int(head, path, ln, "face")
                    if i <= 0:
                        raise ParseError(path, ln, "face indices must be positive (1-based)")
                    if i > len(verts):
                        raise ParseError(path, ln, f"face references vertex {i} before definition")
                    idx.append(i - 1)
                for k in range(1, len(idx) - 1):
                    tris.append([idx[0], idx[k], idx[k + 1]])
            # other OBJ statements (vn, vt, usemtl, o, g, s, ...) are ignored
    if not verts:
        raise ParseError(path, 0, "no vertices found")
    return TriMesh(np.array(verts), np.array(tris, dtype=np.int32).reshape(-1, 3))


def save_obj(mesh: TriMesh, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def load_skel(path: str) -> Skeleton:
    """Read a skeleton file of ``j <index> <name> <parent> <x> <y> <z>`` lines."""
    rows: dict[int, tuple[str, int, list[float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] != "j":
                raise ParseError(path, ln, f"unknown record {parts[0]!r}")
            if len(parts) != 7:
                raise ParseError(path, ln, "joint line needs: j index name parent x y z")
            idx = _parse_int(parts[1], path, ln, "joint")
            if idx in rows:
                raise ParseError(path, ln, f"duplicate joint index {idx}")
            parent = _parse_int(parts[3], path, ln, "parent")
            pos = [_parse_float(t, path, ln, "coordinate") for t in parts[4:7]]
            rows[idx] = (parts[2], parent, pos)
    if not rows:
        raise ParseError(path, 0, "no joints found")
    s = max(rows) + 1
    missing = [j for j in range(s) if j not in rows]
    if missing:
        raise ParseError(path, 0, f"joint indices not contiguous, missing {missing[0]}")
    names = [rows[j][0] for j in range(s)]
    parents = np.array([rows[j][1] for j in range(s)], dtype=np.int32)
    positions = np.array([rows[j][2] for j in range(s)])
    return Skeleton(positions, parents, names)


def save_skel(skeleton: Skeleton, path: str, positions: np.ndarray | None = None) -> None:
    """Write a skeleton; pass ``positions`` to export e.g. current articulations."""
    pts = skeleton.rest_positions if positions is None else np.asarray(positions)
    with open(path, "w", encoding="utf-8") as fh:
        for j in range(skeleton.n_joints):
            p = pts[j]
            fh.write(
                f"j {j} {skeleton.names[j]} {int(skeleton.parents[j])} "
                f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n"
            )


def load_wgt(path: str, shape: tuple[int, int] | None = None,
             role: WeightRole = WeightRole.SKIN_WEIGHTS) -> WeightMatrix:
    """Read sparse ``<row> <col> <value>`` triplets.

    Rows may deviate from unit sum by up to 1e-5 (text rounding) and are
    renormalized; larger deviations are validation errors naming the vertex.
    """
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(path, ln, "expected: vertex joint weight")
            r = _parse_int(parts[0], path, ln, "vertex")
            c = _parse_int(parts[1], path, ln, "joint")
            if r < 0 or c < 0:
                raise ParseError(path, ln, "indices must be nonnegative")
            v = _parse_float(parts[2], path, ln, "weight")
            rows.append(r)
            cols.append(c)
            vals.append(v)
    if not rows:
        raise ParseError(path, 0, "no weights found")
    if shape is None:
        shape = (max(rows) + 1, max(cols) + 1)
    else:
        if max(rows) >= shape[0]:
            raise ValidationError(
                f"{path}: weight references vertex {max(rows)}, mesh has {shape[0]}"
            )
        if max(cols) >= shape[1]:
            raise ValidationError(
                f"{path}: weight references joint {max(cols)}, skeleton has {shape[1]}"
            )
    mat = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    sums = np.asarray(mat.sum(axis=1)).ravel()
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-5)
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"{path}: weight row for vertex {i} sums to {sums[i]:.9g}")
    # Renormalize away text rounding so downstream code sees exact unit rows.
    inv = sp.diags(1.0 / sums)
    wm = WeightMatrix(inv @ mat, role)
    wm.validate(path)
    return wm


def save_wgt(weights: WeightMatrix, path: str) -> None:
    coo = weights.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} {_fmt(coo.data[k])}\n")


def load_rig(mesh_path: str, skeleton_path: str, weights_path: str, cage_path: str) -> Rig:
    """Load and cross-validate the four rig files."""
    skin = load_obj(mesh_path)
    skeleton = load_skel(skeleton_path)
    cage = load_obj(cage_path)
    weights = load_wgt(weights_path, shape=(skin.n_vertices, skeleton.n_joints))
    rig = Rig(skin, skeleton, weights, cage)
    rig.validate()
    return rig


def save_rig(rig: Rig, directory: str, prefix: str) -> dict[str, str]:
    """Write the four rig files and return their paths keyed by kind."""
    os.makedirs(directory, exist_ok=True)
    paths = {
        "mesh": os.path.join(directory, f"{prefix}_skin.obj"),
        "skeleton": os.path.join(directory, f"{prefix}.skel"),
        "weights": os.path.join(directory, f"{prefix}.wgt"),
        "cage": os.path.join(directory, f"{prefix}_cage.obj"),
    }
    save_obj(rig.skin, paths["mesh"])
    save_skel(rig.skeleton, paths["skeleton"])
    save_wgt(rig.weights, paths["weights"])
    save_obj(rig.cage, paths["cage"])
    return paths
