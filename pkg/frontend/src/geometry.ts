/**
 * Decoded geometry frames. The wire carries positions as base64
 * little-endian float32 and triangle indices as int32; this module turns
 * a GEOMETRY message into typed arrays and validates the announced counts.
 */

import { GeometryMessage } from "./protocol.js";

export interface Topology {
  skinTriangles: Int32Array;
  cageTriangles: Int32Array;
  skeletonParents: number[];
}

export interface GeometryFrame {
  frame: number;
  counts: { skin: number; cage: number; joints: number };
  bboxDiag: number;
  skinCurr: Float32Array;
  cageRest: Float32Array;
  cageCurr: Float32Array;
  jointsRest: Float32Array;
  jointsCurr: Float32Array;
  /** Present on the LOAD reply only; later frames carry positions alone. */
  topology?: Topology;
  files?: Record<string, string>;
}

export function decodeFloat32(b64: string, expected: number): Float32Array {
  const raw = Buffer.from(b64, "base64");
  if (raw.length !== expected * 4) {
    throw new RangeError(`expected ${expected} floats, payload holds ${raw.length / 4}`);
  }
  // copy into an aligned buffer; Buffer slices may be offset inside the pool
  const out = new Float32Array(expected);
  for (let i = 0; i < expected; i++) out[i] = raw.readFloatLE(i * 4);
  return out;
}

export function decodeInt32(b64: string, expected: number): Int32Array {
  const raw = Buffer.from(b64, "base64");
  if (raw.length !== expected * 4) {
    throw new RangeError(`expected ${expected} ints, payload holds ${raw.length / 4}`);
  }
  const out = new Int32Array(expected);
  for (let i = 0; i < expected; i++) out[i] = raw.readInt32LE(i * 4);
  return out;
}

export function encodeFloat32(values: ArrayLike<number>): string {
  const buf = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) buf.writeFloatLE(values[i], i * 4);
  return buf.toString("base64");
}

export function parseGeometry(msg: GeometryMessage): GeometryFrame {
  const { skin, cage, joints } = msg.counts;
  const frame: GeometryFrame = {
    frame: msg.frame,
    counts: msg.counts,
    bboxDiag: msg.bbox_diag,
    skinCurr: decodeFloat32(msg.skin_curr, skin * 3),
    cageRest: decodeFloat32(msg.cage_rest, cage * 3),
    cageCurr: decodeFloat32(msg.cage_curr, cage * 3),
    jointsRest: decodeFloat32(msg.joints_rest, joints * 3),
    jointsCurr: decodeFloat32(msg.joints_curr, joints * 3),
  };
  if (msg.skin_triangles !== undefined && msg.cage_triangles !== undefined) {
    const skinRaw = Buffer.from(msg.skin_triangles, "base64");
    const cageRaw = Buffer.from(msg.cage_triangles, "base64");
    frame.topology = {
      skinTriangles: decodeInt32(msg.skin_triangles, skinRaw.length / 4),
      cageTriangles: decodeInt32(msg.cage_triangles, cageRaw.length / 4),
      skeletonParents: msg.skeleton_parents ?? [],
    };
  }
  if (msg.files !== undefined) frame.files = msg.files;
  return frame;
}

/** xyz of point `i` inside a flat position array. */
export function point(positions: Float32Array, i: number): [number, number, number] {
  return [positions[i * 3], positions[i * 3 + 1], positions[i * 3 + 2]];
}

/**
 * Keeps only the newest frame. Stale or duplicate frame ids are dropped,
 * never handed to the renderer; `take` empties the slot so the render
 * loop draws each frame at most once.
 */
export class LatestFrameBuffer {
  private slot: GeometryFrame | null = null;
  private lastFrame = -1;

  offer(frame: GeometryFrame): boolean {
    if (frame.frame <= this.lastFrame) return false;
    this.lastFrame = frame.frame;
    this.slot = frame;
    return true;
  }

  take(): GeometryFrame | null {
    const f = this.slot;
    this.slot = null;
    return f;
  }

  peek(): GeometryFrame | null {
    return this.slot;
  }
}
