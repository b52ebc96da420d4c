"""Timing harness for the session operators.

Setup costs are taken from the session's own phase timers; per-frame
costs are medians over repeated edits against a live session, which is
how the operators run interactively.
"""
from __future__ import annotations

import platform
import time
from dataclasses import dataclass, field

import numpy as np

from .quaternion import quat_from_axis_angle
from .sync import EditDelta, SyncSession


@dataclass
class BenchReport:
    """Median per-frame and one-off setup timings, in seconds."""

    machine: str
    n_vertices: int
    n_joints: int
    n_cage: int
    n_frames: int
    setup_s: dict[str, float] = field(default_factory=dict)
    frame_s: dict[str, float] = field(default_factory=dict)

    def lines(self) -> list[str]:
        """Human readable table, one metric per line."""
        out = [
            f"machine: {self.machine}",
            f"rig: {self.n_vertices} skin vertices, {self.n_joints} joints, "
            f"{self.n_cage} cage vertices",
            f"frames: {self.n_frames}",
            "-- setup (one-off) --",
        ]
        for key, val in self.setup_s.items():
            out.append(f"{key:>24s}: {val * 1e3:9.3f} ms")
        out.append("-- per frame (median) --")
        if not self.frame_s:
            out.append("  (no frames requested)")
        for key, val in self.frame_s.items():
            out.append(f"{key:>24s}: {val * 1e3:9.3f} ms")
        return out


def _median_time(fn, n: int) -> float:
    times = np.empty(n)
    for i in range(n):
        t0 = time.perf_counter()
        fn(i)
        times[i] = time.perf_counter() - t0
    return float(np.median(times))


def machine_description() -> str:
    return (f"{platform.system()} {platform.machine()}, "
            f"python {platform.python_version()}, numpy {np.__version__}")


def run_bench(session: SyncSession, n_frames: int = 50,
              seed: int = 0) -> BenchReport:
    """Time skinning, the cage refit, and the reverse cage edit.

    Each frame applies a small rotation to a mid-chain joint (so the
    reverse operator cannot reuse its cached factorization, matching the
    cost of interactive use) and a small current-cage edit.
    """
    if n_frames < 0:
        raise ValueError("n_frames must be nonnegative")
    rng = np.random.default_rng(seed)
    report = BenchReport(
        machine=machine_description(),
        n_vertices=session.n_vertices,
        n_joints=session.n_joints,
        n_cage=session.n_cage,
        n_frames=n_frames,
        setup_s=dict(session.setup_timings),
    )
    if n_frames == 0:
        return report

    joint = session.n_joints // 2
    axes = rng.normal(size=(n_frames, 3))
    angles = rng.uniform(-0.02, 0.02, size=n_frames)
    verts = rng.integers(0, session.n_cage, size=n_frames)
    offsets = rng.uniform(-1, 1, size=(n_frames, 3))
    offsets *= 1e-3 * session.scale / np.linalg.norm(offsets, axis=1)[:, None]

    # skinning alone
    def do_skin(i: int) -> None:
        session._reskin()

    # rotation edit = FK update + skinning + cage refit
    def do_rotate(i: int) -> None:
        session.edit(EditDelta.skel_rotate(
            joint, quat_from_axis_angle(axes[i], angles[i])))

    def do_cage_up(i: int) -> None:
        session.cage_up()

    # reverse edit with a cold factorization each frame
    def do_cage_rev_cold(i: int) -> None:
        session._rot_version += 1
        session.edit(EditDelta.cage_curr([int(verts[i])], [offsets[i]]))

    def do_cage_rev_warm(i: int) -> None:
        session.edit(EditDelta.cage_curr([int(verts[i])], [offsets[i]]))

    report.frame_s["skinning"] = _median_time(do_skin, n_frames)
    report.frame_s["cage_up"] = _median_time(do_cage_up, n_frames)
    report.frame_s["rotate_edit"] = _median_time(do_rotate, n_frames)
    report.frame_s["cage_rev_cold"] = _median_time(do_cage_rev_cold, n_frames)
    report.frame_s["cage_rev_warm"] = _median_time(do_cage_rev_warm, n_frames)
    return report
