"""Command line front end.

Four subcommands:

* ``deform run script.dscript``      replay an edit script, write snapshots
* ``deform play RIG track.dtrack``   sample a keyframe track to frames
* ``deform bench RIG``               time the operators on a rig
* ``deform serve``                   open the socket endpoint for a viewer

``RIG`` is either a builtin name (``bar``, ``arm``, ``biped``, ``large``)
or four comma separated paths ``mesh.obj,rig.skel,rig.wgt,cage.obj``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import script as scriptmod
from .bench import run_bench
from .model import RigError
from .server import DeformServer
from .skinning import SkinningMethod
from .sync import SessionConfig, SyncSession


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--skinning", choices=[m.value for m in SkinningMethod],
                   default=None, help="skinning method (default lbs)")
    p.add_argument("--ghost", choices=["on", "off"], default=None,
                   help="fit the cage to rigidly skinned loop positions")
    p.add_argument("--tolerance", type=float, default=None,
                   help="audit tolerance as a fraction of the bbox diagonal")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for randomized subcommands")


def _config_from_args(args, base: SessionConfig | None = None) -> SessionConfig:
    cfg = base if base is not None else SessionConfig()
    if args.skinning is not None:
        cfg.skinning = {m.value: m for m in SkinningMethod}[args.skinning]
    if args.ghost is not None:
        cfg.ghost = args.ghost == "on"
    if args.tolerance is not None:
        cfg.audit_tol = args.tolerance
    return cfg


def _cmd_run(args) -> int:
    sc = scriptmod.load_script(args.script)
    sc.config = _config_from_args(args, sc.config)
    base = Path(args.script).resolve().parent
    report = scriptmod.run_script(sc, out_dir=args.out, base=base)
    print(f"applied {report.n_steps} steps in {report.wall_s:.3f}s, "
          f"max audit deviation {report.max_deviation:.3e}")
    for name, files in report.snapshots.items():
        print(f"snapshot {name}:")
        for kind, path in sorted(files.items()):
            print(f"  {kind}: {path}")
    return 0


def _cmd_play(args) -> int:
    rig = scriptmod.parse_rig_spec(args.rig)
    track = scriptmod.load_track(args.track)
    session = SyncSession(rig, _config_from_args(args))
    out = Path(args.out) if args.out else None
    snaps = scriptmod.play_track(session, track, fps=args.fps, out_dir=out)
    worst = max(max(session.audit().values()), 0.0)
    print(f"played {len(snaps)} frames at {args.fps:g} fps, "
          f"final audit deviation {worst:.3e}")
    if out is not None:
        print(f"frames written under {out}")
    return 0


def _cmd_bench(args) -> int:
    rig = scriptmod.parse_rig_spec(args.rig)
    session = SyncSession(rig, _config_from_args(args))
    report = run_bench(session, n_frames=args.frames, seed=args.seed)
    if args.json:
        print(json.dumps({
            "machine": report.machine,
            "n_vertices": report.n_vertices,
            "n_joints": report.n_joints,
            "n_cage": report.n_cage,
            "n_frames": report.n_frames,
            "setup_s": report.setup_s,
            "frame_s": report.frame_s,
        }, indent=2))
    else:
        print("\n".join(report.lines()))
    return 0


def _cmd_serve(args) -> int:
    server = DeformServer(
        host=args.host,
        port=args.port,
        out_dir=Path(args.out) if args.out else None,
        record=Path(args.record) if args.record else None,
        default_config=_config_from_args(args),
    )
    print(f"listening on {args.host}:{server.port}", flush=True)
    try:
        server.serve_forever(once=args.once)
    except KeyboardInterrupt:
        server.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deform",
        description="couple a deformation cage and a skeleton over one skin")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="replay an edit script")
    p_run.add_argument("script", help="path to a .dscript file")
    p_run.add_argument("--out", default=None, help="directory for snapshots")
    _add_config_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_play = sub.add_parser("play", help="sample a keyframe track")
    p_play.add_argument("rig", help="builtin name or four comma separated paths")
    p_play.add_argument("track", help="path to a .dtrack file")
    p_play.add_argument("--fps", type=float, default=24.0)
    p_play.add_argument("--out", default=None, help="directory for frame files")
    _add_config_flags(p_play)
    p_play.set_defaults(fn=_cmd_play)

    p_bench = sub.add_parser("bench", help="time the operators on a rig")
    p_bench.add_argument("rig", help="builtin name or four comma separated paths")
    p_bench.add_argument("--frames", type=int, default=50)
    p_bench.add_argument("--json", action="store_true")
    _add_config_flags(p_bench)
    p_bench.set_defaults(fn=_cmd_bench)

    p_serve = sub.add_parser("serve", help="socket endpoint for a viewer")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=0,
                         help="0 picks a free port (printed on startup)")
    p_serve.add_argument("--out", default=None, help="directory for snapshots")
    p_serve.add_argument("--record", default=None,
                         help="write the session as a replayable script")
    p_serve.add_argument("--once", action="store_true",
                         help="exit after the first connection closes")
    _add_config_flags(p_serve)
    p_serve.set_defaults(fn=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (RigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
