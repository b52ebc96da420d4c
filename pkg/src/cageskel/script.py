"""Text formats for scripted edits and keyframe tracks.

Two small line formats live here. An edit script replays a sequence of
edits against a fresh session and is the unit of record/replay for the
network server. A keyframe track stores sampled skeleton rotations and
rest-cage positions and is resampled for playback.

Both formats are plain ASCII, one record per line, `#` comments, and a
version tag on the first line.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import formats
from .model import ParseError, Rig, TriMesh, ValidationError
from .quaternion import slerp
from .rigs import BUILTIN_RIGS, builtin_rig
from .skinning import SkinningMethod
from .sync import EditDelta, SessionConfig, Snapshot, SyncSession

SCRIPT_MAGIC = "deformscript 1"
TRACK_MAGIC = "deformtrack 1"

_SKINNING_NAMES = {m.value: m for m in SkinningMethod}
_FLAGS = {"on": True, "off": False, "true": True, "false": False}


def parse_rig_spec(spec: str, base: Path | None = None) -> Rig:
    """Resolve a rig spec: ``builtin:NAME``, a bare builtin name, or four
    comma separated paths ``mesh.obj,skel.skel,weights.wgt,cage.obj``."""
    spec = spec.strip()
    if spec.startswith("builtin:"):
        return builtin_rig(spec[len("builtin:"):])
    if spec in BUILTIN_RIGS:
        return builtin_rig(spec)
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) != 4:
        raise ValidationError(
            f"rig spec {spec!r} is neither a builtin name nor four paths")
    root = base if base is not None else Path.cwd()
    paths = [Path(p) if Path(p).is_absolute() else root / p for p in parts]
    return formats.load_rig(*paths)


@dataclass
class ScriptStep:
    """One scripted action: a joint rotation, a cage edit, or a snapshot."""

    kind: str  # "rot" | "crest" | "ccurr" | "snapshot"
    joint: int = -1
    rotation: np.ndarray | None = None
    vertices: np.ndarray | None = None
    offsets: np.ndarray | None = None
    name: str = ""


@dataclass
class EditScript:
    """A rig reference, session configuration, and ordered steps."""

    rig_spec: str
    config: SessionConfig = field(default_factory=SessionConfig)
    seed: int = 0
    steps: list[ScriptStep] = field(default_factory=list)

    def delta_for(self, step: ScriptStep) -> EditDelta:
        if step.kind == "rot":
            return EditDelta.skel_rotate(step.joint, step.rotation)
        if step.kind == "crest":
            return EditDelta.cage_rest(step.vertices, step.offsets)
        if step.kind == "ccurr":
            return EditDelta.cage_curr(step.vertices, step.offsets)
        raise ValidationError(f"step kind {step.kind!r} is not an edit")


def _parse_vertex_offsets(fields: list[str], path: str, ln: int) -> tuple[np.ndarray, np.ndarray]:
    if not fields or len(fields) % 4 != 0:
        raise ParseError(path, ln, "expected groups of <vertex> <dx> <dy> <dz>")
    raw = np.asarray(fields, dtype=object).reshape(-1, 4)
    try:
        verts = raw[:, 0].astype(np.int64)
        offs = raw[:, 1:].astype(np.float64)
    except ValueError as exc:
        raise ParseError(path, ln, str(exc)) from None
    return verts, offs


def load_script(path: str | Path) -> EditScript:
    """Parse an edit script file."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != SCRIPT_MAGIC:
        raise ParseError(str(path), 1, f"expected header {SCRIPT_MAGIC!r}")

    script: EditScript | None = None
    rig_spec = ""
    config = SessionConfig()
    seed = 0
    in_steps = False
    steps: list[ScriptStep] = []
    ended = False

    for ln, line in enumerate(lines[1:], start=2):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if ended:
            raise ParseError(str(path), ln, "content after end")
        fields = text.split()
        key, rest = fields[0], fields[1:]
        if not in_steps:
            if key == "rig":
                rig_spec = " ".join(rest)
            elif key == "skinning":
                if rest[0] not in _SKINNING_NAMES:
                    raise ParseError(str(path), ln, f"unknown skinning {rest[0]!r}")
                config.skinning = _SKINNING_NAMES[rest[0]]
            elif key == "ghost":
                config.ghost = _FLAGS[rest[0].lower()]
            elif key == "s_exp":
                config.s_exp = float(rest[0])
            elif key == "sigma":
                config.sigma = float(rest[0])
            elif key == "tolerance":
                config.audit_tol = float(rest[0])
            elif key == "cap":
                config.edit_cap = None if rest[0] == "none" else float(rest[0])
            elif key == "refit":
                config.refit_joints = _FLAGS[rest[0].lower()]
            elif key == "seed":
                seed = int(rest[0])
            elif key == "steps":
                if not rig_spec:
                    raise ParseError(str(path), ln, "steps before a rig line")
                in_steps = True
            else:
                raise ParseError(str(path), ln, f"unknown header key {key!r}")
            continue
        if key == "rot":
            if len(rest) != 5:
                raise ParseError(str(path), ln, "expected rot <joint> <w> <x> <y> <z>")
            quat = np.asarray(rest[1:], dtype=np.float64)
            steps.append(ScriptStep("rot", joint=int(rest[0]), rotation=quat))
        elif key in ("crest", "ccurr"):
            verts, offs = _parse_vertex_offsets(rest, str(path), ln)
            steps.append(ScriptStep(key, vertices=verts, offsets=offs))
        elif key == "snapshot":
            if len(rest) != 1:
                raise ParseError(str(path), ln, "expected snapshot <name>")
            steps.append(ScriptStep("snapshot", name=rest[0]))
        elif key == "end":
            ended = True
        else:
            raise ParseError(str(path), ln, f"unknown step {key!r}")

    if not ended:
        raise ParseError(str(path), len(lines), "missing end line")
    if not rig_spec:
        raise ParseError(str(path), 1, "missing rig line")
    script = EditScript(rig_spec=rig_spec, config=config, seed=seed, steps=steps)
    return script


def save_script(script: EditScript, path: str | Path) -> None:
    """Write a script in the same format ``load_script`` reads."""
    out = [SCRIPT_MAGIC, f"rig {script.rig_spec}"]
    cfg = script.config
    out.append(f"skinning {cfg.skinning.value}")
    out.append(f"ghost {'on' if cfg.ghost else 'off'}")
    out.append(f"s_exp {formats.FLOAT_FMT % cfg.s_exp}")
    out.append(f"sigma {formats.FLOAT_FMT % cfg.sigma}")
    out.append(f"tolerance {formats.FLOAT_FMT % cfg.audit_tol}")
    out.append("cap none" if cfg.edit_cap is None
               else f"cap {formats.FLOAT_FMT % cfg.edit_cap}")
    out.append(f"refit {'on' if cfg.refit_joints else 'off'}")
    out.append(f"seed {script.seed}")
    out.append("steps")
    for step in script.steps:
        out.append(format_step(step))
    out.append("end")
    Path(path).write_text("\n".join(out) + "\n")


def format_step(step: ScriptStep) -> str:
    """One script line for a step, floats at full round-trip precision."""
    if step.kind == "rot":
        quat = " ".join(formats.FLOAT_FMT % v for v in step.rotation)
        return f"rot {step.joint} {quat}"
    if step.kind in ("crest", "ccurr"):
        groups = []
        for v, off in zip(step.vertices, step.offsets):
            triple = " ".join(formats.FLOAT_FMT % x for x in off)
            groups.append(f"{int(v)} {triple}")
        return f"{step.kind} " + " ".join(groups)
    if step.kind == "snapshot":
        return f"snapshot {step.name}"
    raise ValidationError(f"unknown step kind {step.kind!r}")


@dataclass
class ScriptReport:
    """What a script run did: per-step audit peaks and snapshot files."""

    n_steps: int
    max_deviation: float
    snapshots: dict[str, dict[str, Path]]
    wall_s: float
    session: SyncSession


def run_script(script: EditScript, out_dir: str | Path | None = None,
               base: Path | None = None) -> ScriptReport:
    """Build the session, apply every step, snapshot on request.

    Every edit is audited; a deviation beyond the session tolerance raises
    through ``SyncSession.edit`` and aborts the run with the session rolled
    back to the last good state.
    """
    t0 = time.perf_counter()
    rig = parse_rig_spec(script.rig_spec, base=base)
    session = SyncSession(rig, script.config)
    worst = 0.0
    snapshots: dict[str, dict[str, Path]] = {}
    for step in script.steps:
        if step.kind == "snapshot":
            if out_dir is None:
                continue
            snapshots[step.name] = write_snapshot(
                session.snapshot(), session, Path(out_dir), step.name)
            continue
        session.edit(script.delta_for(step), audit=True)
        worst = max(worst, max(session.audit().values()))
    return ScriptReport(
        n_steps=len(script.steps),
        max_deviation=worst,
        snapshots=snapshots,
        wall_s=time.perf_counter() - t0,
        session=session,
    )


def write_snapshot(snap: Snapshot, session: SyncSession,
                   out_dir: Path, name: str) -> dict[str, Path]:
    """Dump a snapshot as mesh/skeleton/cage files under ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    skin_tris = session.rig.skin.triangles
    cage_tris = session.rig.cage.triangles
    paths = {
        "skin_curr": out_dir / f"{name}_skin.obj",
        "skin_rest": out_dir / f"{name}_skin_rest.obj",
        "cage_curr": out_dir / f"{name}_cage.obj",
        "cage_rest": out_dir / f"{name}_cage_rest.obj",
        "skeleton": out_dir / f"{name}.skel",
    }
    formats.save_obj(TriMesh(snap.skin_curr, skin_tris), paths["skin_curr"])
    formats.save_obj(TriMesh(snap.skin_rest, skin_tris), paths["skin_rest"])
    formats.save_obj(TriMesh(snap.cage_curr, cage_tris), paths["cage_curr"])
    formats.save_obj(TriMesh(snap.cage_rest, cage_tris), paths["cage_rest"])
    formats.save_skel(session.skeleton, paths["skeleton"],
                      positions=snap.joints_curr)
    return paths


@dataclass
class KeyframeTrack:
    """Sampled skeleton rotations and rest-cage positions over time.

    Skeleton and cage keys are independent tracks; either may be empty.
    Skeleton keys hold one unit quaternion per joint, cage keys one point
    per cage vertex. Between keys, rotations take the shortest arc and
    cage positions move linearly; outside the keyed range the nearest key
    holds.
    """

    n_joints: int
    n_cage: int
    skel_times: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.float64))
    skel_keys: np.ndarray = field(
        default_factory=lambda: np.empty((0, 0, 4), dtype=np.float64))
    cage_times: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.float64))
    cage_keys: np.ndarray = field(
        default_factory=lambda: np.empty((0, 0, 3), dtype=np.float64))

    def validate(self) -> None:
        if self.skel_times.size:
            if self.skel_keys.shape != (self.skel_times.size, self.n_joints, 4):
                raise ValidationError("skeleton key shape mismatch")
            if np.any(np.diff(self.skel_times) <= 0):
                raise ValidationError("skeleton key times must increase")
        if self.cage_times.size:
            if self.cage_keys.shape != (self.cage_times.size, self.n_cage, 3):
                raise ValidationError("cage key shape mismatch")
            if np.any(np.diff(self.cage_times) <= 0):
                raise ValidationError("cage key times must increase")

    @property
    def duration(self) -> float:
        ends = [t[-1] for t in (self.skel_times, self.cage_times) if t.size]
        return max(ends) if ends else 0.0


def _bracket(times: np.ndarray, t: float) -> tuple[int, int, float]:
    """Key indices around ``t`` and the blend fraction, clamped at the ends."""
    if t <= times[0]:
        return 0, 0, 0.0
    if t >= times[-1]:
        return times.size - 1, times.size - 1, 0.0
    hi = int(np.searchsorted(times, t, side="right"))
    lo = hi - 1
    frac = (t - times[lo]) / (times[hi] - times[lo])
    return lo, hi, float(frac)


def sample_track(track: KeyframeTrack, t: float,
                 rest_rotation: np.ndarray | None = None,
                 rest_cage: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Rotations (j, 4) and rest cage (c, 3) at time ``t``.

    Tracks without keys fall back to the provided rest values (identity
    rotations, unchanged cage).
    """
    if track.skel_times.size:
        lo, hi, frac = _bracket(track.skel_times, t)
        if lo == hi:
            rots = track.skel_keys[lo].copy()
        else:
            a, b = track.skel_keys[lo], track.skel_keys[hi]
            rots = np.stack([slerp(a[j], b[j], frac)
                             for j in range(track.n_joints)])
    else:
        if rest_rotation is None:
            rest_rotation = np.zeros((track.n_joints, 4))
            rest_rotation[:, 0] = 1.0
        rots = rest_rotation.copy()
    if track.cage_times.size:
        lo, hi, frac = _bracket(track.cage_times, t)
        cage = (1.0 - frac) * track.cage_keys[lo] + frac * track.cage_keys[hi]
    else:
        if rest_cage is None:
            raise ValidationError("track has no cage keys and no rest cage given")
        cage = rest_cage.copy()
    return rots, cage


def load_track(path: str | Path) -> KeyframeTrack:
    """Parse a keyframe track file."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != TRACK_MAGIC:
        raise ParseError(str(path), 1, f"expected header {TRACK_MAGIC!r}")
    n_joints = n_cage = -1
    skel: list[tuple[float, np.ndarray]] = []
    cage: list[tuple[float, np.ndarray]] = []
    ended = False
    for ln, line in enumerate(lines[1:], start=2):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if ended:
            raise ParseError(str(path), ln, "content after end")
        fields = text.split()
        key, rest = fields[0], fields[1:]
        try:
            if key == "joints":
                n_joints = int(rest[0])
            elif key == "cage":
                n_cage = int(rest[0])
            elif key == "skelkey":
                if n_joints < 0:
                    raise ParseError(str(path), ln, "skelkey before joints count")
                vals = np.asarray(rest, dtype=np.float64)
                if vals.size != 1 + 4 * n_joints:
                    raise ParseError(
                        str(path), ln,
                        f"expected 1 + {4 * n_joints} numbers, got {vals.size}")
                quats = vals[1:].reshape(n_joints, 4)
                norms = np.linalg.norm(quats, axis=1)
                if np.any(np.abs(norms - 1.0) > 1e-6):
                    raise ParseError(str(path), ln, "non-unit key quaternion")
                quats = quats / norms[:, None]
                skel.append((float(vals[0]), quats))
            elif key == "cagekey":
                if n_cage < 0:
                    raise ParseError(str(path), ln, "cagekey before cage count")
                vals = np.asarray(rest, dtype=np.float64)
                if vals.size != 1 + 3 * n_cage:
                    raise ParseError(
                        str(path), ln,
                        f"expected 1 + {3 * n_cage} numbers, got {vals.size}")
                cage.append((float(vals[0]), vals[1:].reshape(n_cage, 3)))
            elif key == "end":
                ended = True
            else:
                raise ParseError(str(path), ln, f"unknown record {key!r}")
        except ValueError as exc:
            raise ParseError(str(path), ln, str(exc)) from None
    if not ended:
        raise ParseError(str(path), len(lines), "missing end line")
    if n_joints < 0 or n_cage < 0:
        raise ParseError(str(path), 1, "missing joints or cage count")
    track = KeyframeTrack(
        n_joints=n_joints, n_cage=n_cage,
        skel_times=np.asarray([t for t, _ in skel], dtype=np.float64),
        skel_keys=(np.stack([q for _, q in skel])
                   if skel else np.empty((0, n_joints, 4))),
        cage_times=np.asarray([t for t, _ in cage], dtype=np.float64),
        cage_keys=(np.stack([c for _, c in cage])
                   if cage else np.empty((0, n_cage, 3))),
    )
    track.validate()
    return track


def save_track(track: KeyframeTrack, path: str | Path) -> None:
    """Write a track in the same format ``load_track`` reads."""
    track.validate()
    out = [TRACK_MAGIC, f"joints {track.n_joints}", f"cage {track.n_cage}"]
    for t, quats in zip(track.skel_times, track.skel_keys):
        nums = " ".join(formats.FLOAT_FMT % v for v in quats.ravel())
        out.append(f"skelkey {formats.FLOAT_FMT % t} {nums}")
    for t, pts in zip(track.cage_times, track.cage_keys):
        nums = " ".join(formats.FLOAT_FMT % v for v in pts.ravel())
        out.append(f"cagekey {formats.FLOAT_FMT % t} {nums}")
    out.append("end")
    Path(path).write_text("\n".join(out) + "\n")


def play_track(session: SyncSession, track: KeyframeTrack, fps: float,
               out_dir: str | Path | None = None) -> list[Snapshot]:
    """Sample the track at ``fps`` and drive the session through each pose.

    Every sample rebuilds the pose from scratch (reset, rest cascade,
    rotations in hierarchy order, reskin, cage refit) so playback order
    cannot drift the state. Snapshots are returned per frame and written
    as numbered files when ``out_dir`` is given.
    """
    if fps <= 0:
        raise ValidationError("fps must be positive")
    if track.n_joints != session.n_joints or track.n_cage != session.n_cage:
        raise ValidationError(
            f"track is for {track.n_joints} joints / {track.n_cage} cage "
            f"vertices, session has {session.n_joints} / {session.n_cage}")
    duration = track.duration
    n_frames = max(1, int(round(duration * fps)) + 1)
    rest_cage = session.cage_rest.copy()
    snaps: list[Snapshot] = []
    for i in range(n_frames):
        t = i / fps
        rots, cage = sample_track(track, t, rest_cage=rest_cage)
        snap = session.set_pose(rots, cage)
        snaps.append(snap)
        if out_dir is not None:
            write_snapshot(snap, session, Path(out_dir), f"frame{i:05d}")
    return snaps
