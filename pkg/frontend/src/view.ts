/**
 * View state and input mapping: a perspective camera, handle picking in
 * screen space, and the translation of pointer drags into engine edits.
 *
 * All deformation math stays on the engine side; this module only maps
 * pixels to world-space offsets or trackball rotations and chunks them
 * to respect the engine's per-step offset cap.
 */

import { GeometryFrame, point } from "./geometry.js";
import { EditPayload } from "./protocol.js";

export type Vec3 = [number, number, number];

export const PICK_RADIUS_PX = 12;
/** Engine default per-step offset cap, as a fraction of the bbox diagonal. */
export const EDIT_CAP_FRAC = 0.05;
/** Drag ticks are throttled to this many EDIT messages per second. */
export const MAX_EDITS_PER_SECOND = 120;

const sub = (a: Vec3, b: Vec3): Vec3 => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
const add = (a: Vec3, b: Vec3): Vec3 => [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
const scale = (a: Vec3, s: number): Vec3 => [a[0] * s, a[1] * s, a[2] * s];
const dot = (a: Vec3, b: Vec3): number => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
const cross = (a: Vec3, b: Vec3): Vec3 => [
  a[1] * b[2] - a[2] * b[1],
  a[2] * b[0] - a[0] * b[2],
  a[0] * b[1] - a[1] * b[0],
];
const length = (a: Vec3): number => Math.hypot(a[0], a[1], a[2]);
const normalize = (a: Vec3): Vec3 => {
  const n = length(a);
  if (n === 0) throw new RangeError("zero-length vector");
  return scale(a, 1 / n);
};

export interface Camera {
  position: Vec3;
  target: Vec3;
  up: Vec3;
  /** Vertical field of view in radians. */
  fovY: number;
  viewport: { width: number; height: number };
  near: number;
}

export function defaultCamera(width = 960, height = 720): Camera {
  return {
    position: [0, 0.6, 4],
    target: [0, 0, 0],
    up: [0, 1, 0],
    fovY: Math.PI / 4,
    viewport: { width, height },
    near: 0.01,
  };
}

export interface CameraBasis {
  right: Vec3;
  trueUp: Vec3;
  forward: Vec3;
}

export function cameraBasis(camera: Camera): CameraBasis {
  const forward = normalize(sub(camera.target, camera.position));
  const right = normalize(cross(forward, camera.up));
  const trueUp = cross(right, forward);
  return { right, trueUp, forward };
}

export interface Projected {
  x: number;
  y: number;
  /** Distance along the view axis; larger is farther. */
  depth: number;
}

/** Pixel position of a world point, or null behind the near plane. */
export function project(camera: Camera, p: Vec3): Projected | null {
  const { right, trueUp, forward } = cameraBasis(camera);
  const d = sub(p, camera.position);
  const z = dot(d, forward);
  if (z <= camera.near) return null;
  const f = camera.viewport.height / 2 / Math.tan(camera.fovY / 2);
  return {
    x: camera.viewport.width / 2 + (f * dot(d, right)) / z,
    y: camera.viewport.height / 2 - (f * dot(d, trueUp)) / z,
    depth: z,
  };
}

export type Tool = "SELECT" | "ROTATE_JOINT" | "DRAG_CAGE_REST" | "DRAG_CAGE_CURR";

export type HandleKind = "joint" | "cage-rest" | "cage-curr";

export interface Handle {
  kind: HandleKind;
  index: number;
}

export interface Visibility {
  skinRest: boolean;
  skinCurr: boolean;
  cageRest: boolean;
  cageCurr: boolean;
  skeletonRest: boolean;
  skeletonCurr: boolean;
}

export interface ViewState {
  camera: Camera;
  visibility: Visibility;
  tool: Tool;
  selection: Handle | null;
  /** Clutter control: handles fade with distance from the cursor. */
  fadeHandles: boolean;
  cursor: { x: number; y: number } | null;
}

export function defaultViewState(camera?: Camera): ViewState {
  return {
    camera: camera ?? defaultCamera(),
    visibility: {
      skinRest: false,
      skinCurr: true,
      cageRest: true,
      cageCurr: true,
      skeletonRest: false,
      skeletonCurr: true,
    },
    tool: "SELECT",
    selection: null,
    fadeHandles: false,
    cursor: null,
  };
}

/** Number of handles of this kind present in the frame. */
function handleCount(kind: HandleKind, geom: GeometryFrame): number {
  return kind === "joint" ? geom.counts.joints : geom.counts.cage;
}

/** Set the selection, enforcing that it names an existing handle. */
export function select(state: ViewState, handle: Handle | null, geom: GeometryFrame): void {
  if (handle !== null) {
    const n = handleCount(handle.kind, geom);
    if (handle.index < 0 || handle.index >= n || !Number.isInteger(handle.index)) {
      throw new RangeError(`handle ${handle.kind}:${handle.index} does not exist (count ${n})`);
    }
  }
  state.selection = handle;
}

export function handlePosition(handle: Handle, geom: GeometryFrame): Vec3 {
  switch (handle.kind) {
    case "joint":
      return point(geom.jointsCurr, handle.index);
    case "cage-rest":
      return point(geom.cageRest, handle.index);
    case "cage-curr":
      return point(geom.cageCurr, handle.index);
  }
}

/** Handle sets a tool may grab. Joints are pickable in the current pose
 * only; cage handles in whichever pose the tool edits. */
function candidateKinds(tool: Tool): HandleKind[] {
  switch (tool) {
    case "ROTATE_JOINT":
      return ["joint"];
    case "DRAG_CAGE_REST":
      return ["cage-rest"];
    case "DRAG_CAGE_CURR":
      return ["cage-curr"];
    case "SELECT":
      return ["joint", "cage-curr"];
  }
}

/**
 * Nearest handle within PICK_RADIUS_PX of the click, depth resolved:
 * among handles inside the radius the one closest to the camera wins,
 * with pixel distance then index as deterministic tie-breaks.
 */
export function pick(
  px: { x: number; y: number },
  state: ViewState,
  geom: GeometryFrame,
): Handle | null {
  let best: { handle: Handle; depth: number; dist: number } | null = null;
  for (const kind of candidateKinds(state.tool)) {
    const n = handleCount(kind, geom);
    for (let i = 0; i < n; i++) {
      const proj = project(state.camera, handlePosition({ kind, index: i }, geom));
      if (proj === null) continue;
      const dist = Math.hypot(proj.x - px.x, proj.y - px.y);
      if (dist > PICK_RADIUS_PX) continue;
      if (
        best === null ||
        proj.depth < best.depth - 1e-12 ||
        (Math.abs(proj.depth - best.depth) <= 1e-12 && dist < best.dist)
      ) {
        best = { handle: { kind, index: i }, depth: proj.depth, dist };
      }
    }
  }
  return best === null ? null : best.handle;
}

/** World-space size of one pixel at the given view depth. */
export function worldPerPixel(camera: Camera, depth: number): number {
  return (2 * depth * Math.tan(camera.fovY / 2)) / camera.viewport.height;
}

/**
 * Split one world offset into steps no longer than the engine's cap so a
 * long drag tick becomes a burst of acceptable EDIT messages.
 */
export function chunkOffset(offset: Vec3, cap: number): Vec3[] {
  const len = length(offset);
  if (len === 0) return [];
  const n = Math.max(1, Math.ceil(len / cap));
  const part = scale(offset, 1 / n);
  return Array.from({ length: n }, () => part);
}

/**
 * Map a drag tick to engine edits. Joint drags become a trackball
 * rotation about the joint's current articulation; cage drags become a
 * camera-plane translation of the grabbed vertex, chunked to the cap.
 * Zero motion maps to no messages.
 */
export function dragToDelta(
  state: ViewState,
  handle: Handle,
  motion: { dx: number; dy: number },
  geom: GeometryFrame,
): EditPayload[] {
  if (motion.dx === 0 && motion.dy === 0) return [];
  const { right, trueUp } = cameraBasis(state.camera);

  if (handle.kind === "joint") {
    // full-height drag = half turn; axis lies in the camera plane,
    // perpendicular in feel to the motion (horizontal drag yaws, vertical
    // drag pitches about the camera's right axis)
    const pixels = Math.hypot(motion.dx, motion.dy);
    const angle = (pixels * Math.PI) / state.camera.viewport.height;
    const axis = normalize(add(scale(trueUp, motion.dx), scale(right, motion.dy)));
    const half = angle / 2;
    const s = Math.sin(half);
    return [
      {
        kind: "rot",
        joint: handle.index,
        rotation: [Math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s],
      },
    ];
  }

  const proj = project(state.camera, handlePosition(handle, geom));
  if (proj === null) return [];
  const wpp = worldPerPixel(state.camera, proj.depth);
  const offset = add(scale(right, motion.dx * wpp), scale(trueUp, -motion.dy * wpp));
  const kind = handle.kind === "cage-rest" ? "crest" : "ccurr";
  return chunkOffset(offset, EDIT_CAP_FRAC * geom.bboxDiag).map((part) => ({
    kind,
    vertices: [handle.index],
    offsets: [part],
  }));
}

/**
 * Sliding-interval rate limiter for drag ticks. `allow` returns whether
 * an EDIT may be sent now; denied ticks should fold their motion into
 * the next allowed one.
 */
export class DragThrottle {
  private last = -Infinity;
  private readonly intervalMs: number;

  constructor(
    private readonly now: () => number = Date.now,
    maxPerSecond: number = MAX_EDITS_PER_SECOND,
  ) {
    this.intervalMs = 1000 / maxPerSecond;
  }

  allow(): boolean {
    const t = this.now();
    if (t - this.last < this.intervalMs) return false;
    this.last = t;
    return true;
  }
}
