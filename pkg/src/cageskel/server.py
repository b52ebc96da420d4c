"""Socket endpoint that drives a session for an external viewer.

The wire format is a 4-byte big-endian length prefix followed by one
UTF-8 JSON object. The client speaks first:

* ``HELLO {version}``            -> ``HELLO`` back, or ``ERROR``
* ``LOAD {rig, config?}``        -> ``GEOMETRY`` with topology included
* ``EDIT {edit}``                -> ``GEOMETRY`` (positions only)
* ``SNAPSHOT_REQUEST {name}``    -> ``GEOMETRY`` after writing files
* ``BYE``                        -> connection closes

Geometry arrays travel as base64 little-endian float32 (int32 for
triangles). Edit offsets travel as plain JSON numbers so a recorded
session replays the exact same float64 values. Each ``GEOMETRY`` reply
carries a frame id that increases strictly for the lifetime of the
server process.
"""
from __future__ import annotations

import base64
import json
import re
import socket
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import script as scriptmod
from .model import RigError, ValidationError
from .skinning import SkinningMethod
from .sync import EditDelta, SessionConfig, SyncSession

PROTOCOL_VERSION = 1
MAX_MESSAGE_BYTES = 64 * 1024 * 1024
_NAME_RE = re.compile(r"^[A-Za-z0-9_.-]{1,64}$")


def encode_array(a: np.ndarray, dtype: str = "<f4") -> str:
    """Base64 of a C-order little-endian array."""
    return base64.b64encode(
        np.ascontiguousarray(a, dtype=dtype).tobytes()).decode("ascii")


def decode_array(text: str, shape: tuple[int, ...], dtype: str = "<f4") -> np.ndarray:
    buf = base64.b64decode(text.encode("ascii"))
    return np.frombuffer(buf, dtype=dtype).reshape(shape).copy()


def send_message(sock: socket.socket, obj: dict) -> None:
    payload = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    sock.sendall(len(payload).to_bytes(4, "big") + payload)


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            if got == 0:
                return None
            raise ConnectionError("connection closed mid-message")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def recv_message(sock: socket.socket) -> dict | None:
    """One framed JSON object, or ``None`` on clean end of stream."""
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    length = int.from_bytes(header, "big")
    if length > MAX_MESSAGE_BYTES:
        raise ConnectionError(f"message of {length} bytes exceeds the limit")
    payload = _recv_exact(sock, length)
    if payload is None:
        raise ConnectionError("connection closed mid-message")
    obj = json.loads(payload.decode("utf-8"))
    if not isinstance(obj, dict):
        raise ConnectionError("top-level message must be a JSON object")
    return obj


def request(sock: socket.socket, obj: dict) -> dict:
    """Send one message and block for the reply (client-side helper)."""
    send_message(sock, obj)
    reply = recv_message(sock)
    if reply is None:
        raise ConnectionError("server closed the connection")
    return reply


def config_from_json(obj: dict) -> SessionConfig:
    cfg = SessionConfig()
    names = {m.value: m for m in SkinningMethod}
    if "skinning" in obj:
        if obj["skinning"] not in names:
            raise ValidationError(f"unknown skinning {obj['skinning']!r}")
        cfg.skinning = names[obj["skinning"]]
    if "ghost" in obj:
        cfg.ghost = bool(obj["ghost"])
    if "s_exp" in obj:
        cfg.s_exp = float(obj["s_exp"])
    if "sigma" in obj:
        cfg.sigma = float(obj["sigma"])
    if "tolerance" in obj:
        cfg.audit_tol = float(obj["tolerance"])
    if "cap" in obj:
        cfg.edit_cap = None if obj["cap"] is None else float(obj["cap"])
    if "refit" in obj:
        cfg.refit_joints = bool(obj["refit"])
    return cfg


def step_from_json(obj: dict) -> scriptmod.ScriptStep:
    """An EDIT payload as a script step (shared with record/replay)."""
    kind = obj.get("kind")
    if kind == "rot":
        rot = np.asarray(obj["rotation"], dtype=np.float64)
        return scriptmod.ScriptStep("rot", joint=int(obj["joint"]), rotation=rot)
    if kind in ("crest", "ccurr"):
        verts = np.asarray(obj["vertices"], dtype=np.int64)
        offs = np.asarray(obj["offsets"], dtype=np.float64)
        return scriptmod.ScriptStep(kind, vertices=verts, offsets=offs)
    raise ValidationError(f"unknown edit kind {kind!r}")


def delta_from_step(step: scriptmod.ScriptStep) -> EditDelta:
    if step.kind == "rot":
        return EditDelta.skel_rotate(step.joint, step.rotation)
    if step.kind == "crest":
        return EditDelta.cage_rest(step.vertices, step.offsets)
    return EditDelta.cage_curr(step.vertices, step.offsets)


@dataclass
class _Recording:
    """Script lines accumulated for one loaded session."""

    rig_spec: str
    config: SessionConfig
    seed: int = 0
    steps: list[scriptmod.ScriptStep] = field(default_factory=list)

    def write(self, path: Path) -> None:
        sc = scriptmod.EditScript(rig_spec=self.rig_spec, config=self.config,
                                  seed=self.seed, steps=self.steps)
        scriptmod.save_script(sc, path)


class DeformServer:
    """Single-threaded server owning at most one session per connection."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 out_dir: Path | None = None, record: Path | None = None,
                 default_config: SessionConfig | None = None):
        self.out_dir = out_dir
        self.record_path = record
        self.default_config = default_config
        self.frame = 0
        self.listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.listener.bind((host, port))
        self.listener.listen(1)
        self.port = self.listener.getsockname()[1]

    def close(self) -> None:
        self.listener.close()

    def serve_forever(self, once: bool = False) -> None:
        try:
            while True:
                conn, _ = self.listener.accept()
                try:
                    self._serve_connection(conn)
                finally:
                    conn.close()
                if once:
                    return
        finally:
            self.close()

    # -- per-connection state machine ------------------------------------

    def _serve_connection(self, conn: socket.socket) -> None:
        session: SyncSession | None = None
        recording: _Recording | None = None
        greeted = False
        try:
            while True:
                try:
                    msg = recv_message(conn)
                except (ConnectionError, json.JSONDecodeError):
                    return
                if msg is None or msg.get("type") == "BYE":
                    return
                mtype = msg.get("type")
                if mtype == "HELLO":
                    if msg.get("version") != PROTOCOL_VERSION:
                        send_message(conn, _error(
                            "bad_version",
                            f"server speaks version {PROTOCOL_VERSION}"))
                        return
                    greeted = True
                    send_message(conn, {"type": "HELLO",
                                        "version": PROTOCOL_VERSION})
                    continue
                if not greeted:
                    send_message(conn, _error("bad_message", "HELLO first"))
                    return
                if mtype == "LOAD":
                    session, recording = self._handle_load(conn, msg)
                elif mtype == "EDIT":
                    self._handle_edit(conn, msg, session, recording)
                elif mtype == "SNAPSHOT_REQUEST":
                    self._handle_snapshot(conn, msg, session, recording)
                else:
                    send_message(conn, _error(
                        "bad_message", f"unknown message type {mtype!r}"))
        finally:
            if recording is not None and self.record_path is not None:
                recording.write(self.record_path)

    def _handle_load(self, conn, msg) -> tuple[SyncSession | None, _Recording | None]:
        spec = msg.get("rig")
        if not isinstance(spec, str):
            send_message(conn, _error("bad_message", "LOAD needs a rig spec"))
            return None, None
        try:
            cfg = (config_from_json(msg["config"]) if "config" in msg
                   else (self.default_config if self.default_config is not None
                         else SessionConfig()))
            rig = scriptmod.parse_rig_spec(spec)
            session = SyncSession(rig, cfg)
        except (RigError, OSError, ValueError) as exc:
            send_message(conn, _error("load_failed", str(exc)))
            return None, None
        recording = _Recording(rig_spec=spec, config=cfg)
        self.frame += 1
        send_message(conn, geometry_message(session, self.frame,
                                            with_topology=True))
        return session, recording

    def _handle_edit(self, conn, msg, session, recording) -> None:
        if session is None:
            send_message(conn, _error("no_session", "LOAD a rig first"))
            return
        try:
            step = step_from_json(msg.get("edit", {}))
            session.edit(delta_from_step(step), audit=True)
        except (RigError, KeyError, TypeError, ValueError) as exc:
            send_message(conn, _error("edit_rejected", str(exc)))
            return
        if recording is not None:
            recording.steps.append(step)
        self.frame += 1
        send_message(conn, geometry_message(session, self.frame))

    def _handle_snapshot(self, conn, msg, session, recording) -> None:
        if session is None:
            send_message(conn, _error("no_session", "LOAD a rig first"))
            return
        name = msg.get("name", "snapshot")
        if not isinstance(name, str) or not _NAME_RE.match(name):
            send_message(conn, _error(
                "bad_message", "snapshot names are [A-Za-z0-9_.-], max 64"))
            return
        paths = {}
        if self.out_dir is not None:
            paths = scriptmod.write_snapshot(
                session.snapshot(), session, self.out_dir, name)
        if recording is not None:
            recording.steps.append(scriptmod.ScriptStep("snapshot", name=name))
        self.frame += 1
        reply = geometry_message(session, self.frame)
        reply["files"] = {k: str(v) for k, v in paths.items()}
        send_message(conn, reply)


def _error(code: str, text: str) -> dict:
    return {"type": "ERROR", "code": code, "text": text}


def geometry_message(session: SyncSession, frame: int,
                     with_topology: bool = False) -> dict:
    snap = session.snapshot()
    msg = {
        "type": "GEOMETRY",
        "frame": frame,
        "counts": {
            "skin": session.n_vertices,
            "cage": session.n_cage,
            "joints": session.n_joints,
        },
        "bbox_diag": session.scale,
        "skin_curr": encode_array(snap.skin_curr),
        "cage_rest": encode_array(snap.cage_rest),
        "cage_curr": encode_array(snap.cage_curr),
        "joints_rest": encode_array(snap.joints_rest),
        "joints_curr": encode_array(snap.joints_curr),
    }
    if with_topology:
        msg["skin_triangles"] = encode_array(session.rig.skin.triangles, "<i4")
        msg["cage_triangles"] = encode_array(session.rig.cage.triangles, "<i4")
        msg["skeleton_parents"] = [int(p) for p in session.rig.skeleton.parents]
    return msg
