import { describe, expect, it } from "vitest";

import { GeometryFrame, Topology } from "../src/geometry.js";
import {
  FADE_MIN_ALPHA,
  HandleCommand,
  LineCommand,
  renderFrame,
} from "../src/render.js";
import { defaultViewState, project } from "../src/view.js";

// a single triangle pair sharing one edge, plus a two-joint chain
const topology: Topology = {
  skinTriangles: Int32Array.from([0, 1, 2]),
  cageTriangles: Int32Array.from([0, 1, 2, 2, 1, 3]),
  skeletonParents: [-1, 0],
};

function identityFrame(): GeometryFrame {
  const cage = Float32Array.from([0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0]);
  return {
    frame: 3,
    counts: { skin: 3, cage: 4, joints: 2 },
    bboxDiag: 2,
    skinCurr: Float32Array.from([0, 0, 0, 1, 0, 0, 0, 1, 0]),
    cageRest: cage,
    cageCurr: Float32Array.from(cage),
    jointsRest: Float32Array.from([0.2, 0, 0, 0.8, 0, 0]),
    jointsCurr: Float32Array.from([0.2, 0, 0, 0.8, 0, 0]),
    topology,
  };
}

function allOn(state = defaultViewState()) {
  state.visibility = {
    skinRest: true,
    skinCurr: true,
    cageRest: true,
    cageCurr: true,
    skeletonRest: true,
    skeletonCurr: true,
  };
  return state;
}

describe("draw list", () => {
  it("is empty with every structure toggled off", () => {
    const state = defaultViewState();
    state.visibility = {
      skinRest: false,
      skinCurr: false,
      cageRest: false,
      cageCurr: false,
      skeletonRest: false,
      skeletonCurr: false,
    };
    expect(renderFrame(state, identityFrame())).toEqual([]);
  });

  it("draws every toggled structure in both poses", () => {
    const out = renderFrame(allOn(), identityFrame());
    const tags = out.map((c) => `${c.kind}:${c.structure}:${c.pose}`);
    expect(tags).toContain("triangles:skin:curr");
    expect(tags).toContain("lines:cage:rest");
    expect(tags).toContain("handles:cage:curr");
    expect(tags).toContain("lines:skeleton:curr");
    expect(tags).toContain("handles:skeleton:rest");
    // rest overlays are the ghosted ones
    for (const c of out) expect(c.ghost).toBe(c.pose === "rest");
  });

  it("projects rest and current structures to the same pixels at identity", () => {
    const state = allOn();
    const out = renderFrame(state, identityFrame());
    const handles = out.filter((c): c is HandleCommand => c.kind === "handles");
    const byKey = new Map(handles.map((c) => [`${c.structure}:${c.pose}`, c.positions]));
    for (const structure of ["cage", "skeleton"] as const) {
      const rest = byKey.get(`${structure}:rest`)!;
      const curr = byKey.get(`${structure}:curr`)!;
      for (let i = 0; i < rest.length; i += 3) {
        const a = project(state.camera, [rest[i], rest[i + 1], rest[i + 2]])!;
        const b = project(state.camera, [curr[i], curr[i + 1], curr[i + 2]])!;
        expect(a.x).toBe(b.x);
        expect(a.y).toBe(b.y);
      }
    }
  });

  it("emits each undirected cage edge once", () => {
    const out = renderFrame(allOn(), identityFrame());
    const cageLines = out.find(
      (c): c is LineCommand => c.kind === "lines" && c.structure === "cage" && c.pose === "curr",
    )!;
    // two triangles sharing an edge: 5 unique edges, 6 floats each
    expect(cageLines.segments.length).toBe(5 * 6);
  });

  it("skips bone segments for roots but keeps their joint handles", () => {
    const out = renderFrame(allOn(), identityFrame());
    const bones = out.find(
      (c): c is LineCommand => c.kind === "lines" && c.structure === "skeleton" && c.pose === "curr",
    )!;
    expect(bones.segments.length).toBe(1 * 6);
    const joints = out.find(
      (c): c is HandleCommand => c.kind === "handles" && c.structure === "skeleton" && c.pose === "curr",
    )!;
    expect(joints.positions.length).toBe(2 * 3);
  });

  it("omits triangle and wireframe commands when no topology is known", () => {
    const geom = identityFrame();
    delete geom.topology;
    const out = renderFrame(allOn(), geom);
    expect(out.every((c) => c.kind === "handles")).toBe(true);
    expect(out.length).toBeGreaterThan(0);
  });
});

describe("handle fading near the cursor", () => {
  it("keeps all alphas at one with fading off", () => {
    const out = renderFrame(allOn(), identityFrame());
    for (const c of out) {
      if (c.kind !== "handles") continue;
      for (const a of c.alphas) expect(a).toBe(1);
    }
  });

  it("fades with distance from the cursor, clamped to the floor", () => {
    const state = allOn();
    state.fadeHandles = true;
    const geom = identityFrame();
    const at = project(state.camera, [0, 0, 0])!;
    state.cursor = { x: at.x, y: at.y };
    const out = renderFrame(state, geom);
    const cage = out.find(
      (c): c is HandleCommand => c.kind === "handles" && c.structure === "cage" && c.pose === "curr",
    )!;
    // vertex 0 sits under the cursor: fully opaque
    expect(cage.alphas[0]).toBeCloseTo(1, 6);
    // the others are farther and dimmer, never below the floor
    for (let i = 1; i < cage.alphas.length; i++) {
      expect(cage.alphas[i]).toBeLessThan(cage.alphas[0]);
      expect(cage.alphas[i]).toBeGreaterThanOrEqual(FADE_MIN_ALPHA);
    }
    // monotone: vertex 3 is farther from the cursor than vertex 1
    expect(cage.alphas[3]).toBeLessThanOrEqual(cage.alphas[1]);
  });
});
