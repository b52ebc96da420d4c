import { describe, expect, it } from "vitest";

import { GeometryFrame } from "../src/geometry.js";
import {
  Camera,
  DragThrottle,
  EDIT_CAP_FRAC,
  defaultViewState,
  dragToDelta,
  pick,
  project,
  select,
  worldPerPixel,
} from "../src/view.js";

// straight-on camera: f = 300, origin projects to (400, 300) at depth 5
const camera: Camera = {
  position: [0, 0, 5],
  target: [0, 0, 0],
  up: [0, 1, 0],
  fovY: Math.PI / 2,
  viewport: { width: 800, height: 600 },
  near: 0.01,
};

function frame(over: Partial<GeometryFrame> = {}): GeometryFrame {
  const cage = over.cageCurr ?? Float32Array.from([0, 0, 0, 0, 0, -2]);
  return {
    frame: 1,
    counts: {
      skin: 1,
      cage: cage.length / 3,
      joints: (over.jointsCurr?.length ?? 3) / 3,
    },
    bboxDiag: 2.0,
    skinCurr: Float32Array.from([0, 0, 0]),
    cageRest: over.cageRest ?? cage,
    cageCurr: cage,
    jointsRest: over.jointsRest ?? Float32Array.from([0, 1, 0]),
    jointsCurr: over.jointsCurr ?? Float32Array.from([0, 1, 0]),
    ...over,
  };
}

function state(tool: ReturnType<typeof defaultViewState>["tool"]) {
  const s = defaultViewState(camera);
  s.tool = tool;
  return s;
}

describe("projection", () => {
  it("maps world axes to the expected pixels", () => {
    expect(project(camera, [0, 0, 0])).toMatchObject({ x: 400, y: 300, depth: 5 });
    const px = project(camera, [1, 0, 0])!;
    expect(px.x).toBeCloseTo(460, 10);
    const py = project(camera, [0, 1, 0])!;
    expect(py.y).toBeCloseTo(240, 10);
  });

  it("returns null behind the near plane", () => {
    expect(project(camera, [0, 0, 6])).toBeNull();
  });
});

describe("picking", () => {
  it("returns null for a click far from all handles", () => {
    expect(pick({ x: 50, y: 50 }, state("SELECT"), frame())).toBeNull();
  });

  it("returns the cage vertex under an exact click", () => {
    const got = pick({ x: 400, y: 300 }, state("DRAG_CAGE_CURR"), frame());
    expect(got).toEqual({ kind: "cage-curr", index: 0 });
  });

  it("resolves two handles inside the radius by depth", () => {
    // both cage vertices project to (400, 300); index 1 sits farther away
    const f = frame({ cageCurr: Float32Array.from([0, 0, -2, 0, 0, 0]) });
    const got = pick({ x: 400, y: 300 }, state("DRAG_CAGE_CURR"), f);
    expect(got).toEqual({ kind: "cage-curr", index: 1 });
  });

  it("only offers handles of the pose the tool edits", () => {
    const f = frame({
      cageCurr: Float32Array.from([0, 0, 0, 0, 0, -2]),
      cageRest: Float32Array.from([1, 0, 0, 1, 0, -2]),
    });
    const restPick = pick({ x: 460, y: 300 }, state("DRAG_CAGE_REST"), f);
    expect(restPick).toEqual({ kind: "cage-rest", index: 0 });
    expect(pick({ x: 460, y: 300 }, state("DRAG_CAGE_CURR"), f)).toBeNull();
    expect(pick({ x: 400, y: 300 }, state("DRAG_CAGE_REST"), f)).toBeNull();
  });

  it("offers joints only to tools that rotate or select", () => {
    const f = frame({ jointsCurr: Float32Array.from([0, 0, 0]) });
    expect(pick({ x: 400, y: 300 }, state("ROTATE_JOINT"), f)).toEqual({
      kind: "joint",
      index: 0,
    });
    // joint and cage vertex 0 coincide; the select tool sees both and
    // keeps the deterministic joint-first ordering on exact ties
    expect(pick({ x: 400, y: 300 }, state("SELECT"), f)!.index).toBe(0);
  });
});

describe("selection invariant", () => {
  it("accepts only handles that exist in the frame", () => {
    const s = state("SELECT");
    const f = frame();
    select(s, { kind: "cage-curr", index: 1 }, f);
    expect(s.selection).toEqual({ kind: "cage-curr", index: 1 });
    expect(() => select(s, { kind: "joint", index: 99 }, f)).toThrow(RangeError);
    select(s, null, f);
    expect(s.selection).toBeNull();
  });
});

describe("drag mapping", () => {
  it("maps zero motion to no messages", () => {
    const out = dragToDelta(state("DRAG_CAGE_CURR"), { kind: "cage-curr", index: 0 }, { dx: 0, dy: 0 }, frame());
    expect(out).toEqual([]);
  });

  it("translates a cage vertex in the camera plane at its depth", () => {
    const f = frame({ bboxDiag: 100 });
    const wpp = worldPerPixel(camera, 5);
    const out = dragToDelta(state("DRAG_CAGE_CURR"), { kind: "cage-curr", index: 0 }, { dx: 60, dy: -30 }, f);
    expect(out).toHaveLength(1);
    const edit = out[0];
    if (edit.kind !== "ccurr") throw new Error("expected a cage edit");
    expect(edit.vertices).toEqual([0]);
    expect(edit.offsets[0][0]).toBeCloseTo(60 * wpp, 12);
    expect(edit.offsets[0][1]).toBeCloseTo(30 * wpp, 12);
    expect(edit.offsets[0][2]).toBeCloseTo(0, 12);
  });

  it("targets the rest cage when the tool does", () => {
    const out = dragToDelta(state("DRAG_CAGE_REST"), { kind: "cage-rest", index: 1 }, { dx: 10, dy: 0 }, frame({ bboxDiag: 100 }));
    expect(out[0].kind).toBe("crest");
  });

  it("chunks long drags to the engine's offset cap", () => {
    const f = frame(); // bbox 2.0 -> cap 0.1
    const out = dragToDelta(state("DRAG_CAGE_CURR"), { kind: "cage-curr", index: 0 }, { dx: 60, dy: 0 }, f);
    const cap = EDIT_CAP_FRAC * f.bboxDiag;
    expect(out.length).toBeGreaterThan(1);
    let total = 0;
    for (const edit of out) {
      if (edit.kind === "rot") throw new Error("unexpected rotation");
      const [x, y, z] = edit.offsets[0];
      const len = Math.hypot(x, y, z);
      expect(len).toBeLessThanOrEqual(cap + 1e-12);
      total += x;
    }
    expect(total).toBeCloseTo(60 * worldPerPixel(camera, 5), 12);
  });

  it("turns a horizontal joint drag into a yaw about the view up axis", () => {
    const out = dragToDelta(state("ROTATE_JOINT"), { kind: "joint", index: 0 }, { dx: 600, dy: 0 }, frame());
    expect(out).toHaveLength(1);
    const edit = out[0];
    if (edit.kind !== "rot") throw new Error("expected a rotation");
    expect(edit.joint).toBe(0);
    const [w, x, y, z] = edit.rotation;
    // 600 px across a 600 px viewport is a half turn
    expect(w).toBeCloseTo(0, 12);
    expect(x).toBeCloseTo(0, 12);
    expect(y).toBeCloseTo(1, 12);
    expect(z).toBeCloseTo(0, 12);
  });

  it("turns a vertical joint drag into a pitch about the view right axis", () => {
    const out = dragToDelta(state("ROTATE_JOINT"), { kind: "joint", index: 0 }, { dx: 0, dy: 300 }, frame());
    const edit = out[0];
    if (edit.kind !== "rot") throw new Error("expected a rotation");
    const [w, x, y, z] = edit.rotation;
    expect(w).toBeCloseTo(Math.cos(Math.PI / 4), 12);
    expect(x).toBeCloseTo(Math.sin(Math.PI / 4), 12);
    expect(y).toBeCloseTo(0, 12);
    expect(z).toBeCloseTo(0, 12);
    // unit quaternion either way
    expect(Math.hypot(w, x, y, z)).toBeCloseTo(1, 12);
  });
});

describe("drag throttle", () => {
  it("admits at most 120 edits per simulated second", () => {
    let t = 0;
    const throttle = new DragThrottle(() => t);
    let allowed = 0;
    for (; t < 1000; t += 0.5) if (throttle.allow()) allowed++;
    expect(allowed).toBeLessThanOrEqual(120);
    // the 0.5 ms tick grid stretches the effective interval slightly
    expect(allowed).toBeGreaterThanOrEqual(115);
  });

  it("denies back-to-back ticks and recovers after the interval", () => {
    let t = 0;
    const throttle = new DragThrottle(() => t);
    expect(throttle.allow()).toBe(true);
    expect(throttle.allow()).toBe(false);
    t += 1000 / 120 + 0.01;
    expect(throttle.allow()).toBe(true);
  });
});
