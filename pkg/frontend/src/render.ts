/**
 * Headless renderer: turns a view state plus a geometry frame into an
 * ordered draw list. A GPU backend consumes the commands verbatim; tests
 * consume them directly. Every displayed vertex comes straight from the
 * engine's GEOMETRY arrays, never from client-side deformation.
 */

import { GeometryFrame, Topology, point } from "./geometry.js";
import { ViewState, project } from "./view.js";

/** Pixel radius where cursor-distance fading bottoms out. */
export const FADE_RADIUS_PX = 160;
/** Faded handles stay faintly visible so nothing vanishes outright. */
export const FADE_MIN_ALPHA = 0.15;
export const HANDLE_RADIUS_PX = 5;

export interface TriangleCommand {
  kind: "triangles";
  structure: "skin";
  pose: "rest" | "curr";
  positions: Float32Array;
  indices: Int32Array;
  /** Rest-pose overlays draw ghosted (translucent, depth-biased). */
  ghost: boolean;
}

export interface LineCommand {
  kind: "lines";
  structure: "cage" | "skeleton";
  pose: "rest" | "curr";
  /** Flat xyz pairs: segment k spans elements [6k, 6k+6). */
  segments: Float32Array;
  ghost: boolean;
}

export interface HandleCommand {
  kind: "handles";
  structure: "cage" | "skeleton";
  pose: "rest" | "curr";
  positions: Float32Array;
  /** Per-handle opacity after cursor fading. */
  alphas: Float32Array;
  radiusPx: number;
  ghost: boolean;
}

export type DrawCommand = TriangleCommand | LineCommand | HandleCommand;

/** Unique undirected edges of an index triple list, as flat segments. */
function wireframeSegments(positions: Float32Array, triangles: Int32Array): Float32Array {
  const seen = new Set<number>();
  const coords: number[] = [];
  const nTri = triangles.length / 3;
  for (let t = 0; t < nTri; t++) {
    for (let k = 0; k < 3; k++) {
      const a = triangles[t * 3 + k];
      const b = triangles[t * 3 + ((k + 1) % 3)];
      const key = a < b ? a * 1048576 + b : b * 1048576 + a;
      if (seen.has(key)) continue;
      seen.add(key);
      coords.push(...point(positions, a), ...point(positions, b));
    }
  }
  return Float32Array.from(coords);
}

function boneSegments(joints: Float32Array, parents: number[]): Float32Array {
  const coords: number[] = [];
  for (let j = 0; j < parents.length; j++) {
    const p = parents[j];
    if (p < 0) continue;
    coords.push(...point(joints, p), ...point(joints, j));
  }
  return Float32Array.from(coords);
}

function handleAlphas(state: ViewState, positions: Float32Array): Float32Array {
  const n = positions.length / 3;
  const alphas = new Float32Array(n).fill(1);
  if (!state.fadeHandles || state.cursor === null) return alphas;
  for (let i = 0; i < n; i++) {
    const proj = project(state.camera, point(positions, i));
    if (proj === null) {
      alphas[i] = FADE_MIN_ALPHA;
      continue;
    }
    const d = Math.hypot(proj.x - state.cursor.x, proj.y - state.cursor.y);
    const t = Math.min(1, d / FADE_RADIUS_PX);
    alphas[i] = 1 - (1 - FADE_MIN_ALPHA) * t;
  }
  return alphas;
}

/**
 * Build the draw list for one frame. Structures toggled off contribute
 * nothing; with everything off the list is empty. Topology defaults to
 * the one embedded in the frame (the LOAD reply); later frames reuse the
 * topology retained by the caller.
 */
export function renderFrame(
  state: ViewState,
  geom: GeometryFrame,
  topology: Topology | undefined = geom.topology,
): DrawCommand[] {
  const out: DrawCommand[] = [];
  const vis = state.visibility;

  // skin meshes first so overlays draw over the surface
  if (topology !== undefined) {
    if (vis.skinCurr) {
      out.push({
        kind: "triangles",
        structure: "skin",
        pose: "curr",
        positions: geom.skinCurr,
        indices: topology.skinTriangles,
        ghost: false,
      });
    }
    if (vis.skinRest) {
      out.push({
        kind: "triangles",
        structure: "skin",
        pose: "rest",
        positions: frameRestSkin(geom),
        indices: topology.skinTriangles,
        ghost: true,
      });
    }
  }

  const cagePoses: Array<["rest" | "curr", Float32Array, boolean]> = [];
  if (vis.cageCurr) cagePoses.push(["curr", geom.cageCurr, false]);
  if (vis.cageRest) cagePoses.push(["rest", geom.cageRest, true]);
  for (const [pose, positions, ghost] of cagePoses) {
    if (topology !== undefined) {
      out.push({
        kind: "lines",
        structure: "cage",
        pose,
        segments: wireframeSegments(positions, topology.cageTriangles),
        ghost,
      });
    }
    out.push({
      kind: "handles",
      structure: "cage",
      pose,
      positions,
      alphas: handleAlphas(state, positions),
      radiusPx: HANDLE_RADIUS_PX,
      ghost,
    });
  }

  const skelPoses: Array<["rest" | "curr", Float32Array, boolean]> = [];
  if (vis.skeletonCurr) skelPoses.push(["curr", geom.jointsCurr, false]);
  if (vis.skeletonRest) skelPoses.push(["rest", geom.jointsRest, true]);
  for (const [pose, joints, ghost] of skelPoses) {
    if (topology !== undefined && topology.skeletonParents.length > 0) {
      out.push({
        kind: "lines",
        structure: "skeleton",
        pose,
        segments: boneSegments(joints, topology.skeletonParents),
        ghost,
      });
    }
    out.push({
      kind: "handles",
      structure: "skeleton",
      pose,
      positions: joints,
      alphas: handleAlphas(state, joints),
      radiusPx: HANDLE_RADIUS_PX + 2,
      ghost,
    });
  }
  return out;
}

// The wire protocol deliberately omits rest skin positions from per-edit
// frames (they change only under rest-cage edits and can be recovered by
// a SNAPSHOT_REQUEST); the rest overlay therefore shows the current skin
// until a frame carrying rest data arrives. Kept as a seam for a later
// protocol field.
function frameRestSkin(geom: GeometryFrame): Float32Array {
  return geom.skinCurr;
}
