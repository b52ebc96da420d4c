/**
 * Wire message types shared with the engine's `deform serve` endpoint.
 *
 * Every message is a JSON object with a `type` tag. Geometry arrays ride
 * as base64 little-endian 32-bit floats; triangle indices as 32-bit ints.
 * The engine echoes exactly one reply per request, so the client can run
 * a simple FIFO of pending resolvers.
 */

export const PROTOCOL_VERSION = 1;

/** Upper bound on a single framed message, matching the server. */
export const MAX_MESSAGE_BYTES = 64 * 1024 * 1024;

export type EditKind = "rot" | "crest" | "ccurr";

export interface RotationEdit {
  kind: "rot";
  joint: number;
  /** Unit quaternion, scalar first: [w, x, y, z]. */
  rotation: [number, number, number, number];
}

export interface CageEdit {
  kind: "crest" | "ccurr";
  vertices: number[];
  offsets: [number, number, number][];
}

export type EditPayload = RotationEdit | CageEdit;

export interface HelloMessage {
  type: "HELLO";
  version: number;
}

export interface LoadMessage {
  type: "LOAD";
  rig: string;
  config?: Record<string, unknown>;
}

export interface EditMessage {
  type: "EDIT";
  edit: EditPayload;
}

export interface SnapshotRequestMessage {
  type: "SNAPSHOT_REQUEST";
  name: string;
}

export interface ByeMessage {
  type: "BYE";
}

export interface GeometryMessage {
  type: "GEOMETRY";
  frame: number;
  counts: { skin: number; cage: number; joints: number };
  bbox_diag: number;
  skin_curr: string;
  cage_rest: string;
  cage_curr: string;
  joints_rest: string;
  joints_curr: string;
  skin_triangles?: string;
  cage_triangles?: string;
  skeleton_parents?: number[];
  files?: Record<string, string>;
}

export type ErrorCode =
  | "bad_version"
  | "bad_message"
  | "no_session"
  | "load_failed"
  | "edit_rejected";

export interface ErrorMessage {
  type: "ERROR";
  code: ErrorCode;
  text: string;
}

export type ServerMessage = HelloMessage | GeometryMessage | ErrorMessage;
export type ClientMessage =
  | HelloMessage
  | LoadMessage
  | EditMessage
  | SnapshotRequestMessage
  | ByeMessage;

export function isGeometry(msg: unknown): msg is GeometryMessage {
  return (
    typeof msg === "object" &&
    msg !== null &&
    (msg as { type?: unknown }).type === "GEOMETRY"
  );
}

export function isError(msg: unknown): msg is ErrorMessage {
  return (
    typeof msg === "object" &&
    msg !== null &&
    (msg as { type?: unknown }).type === "ERROR"
  );
}

export function isHello(msg: unknown): msg is HelloMessage {
  return (
    typeof msg === "object" &&
    msg !== null &&
    (msg as { type?: unknown }).type === "HELLO"
  );
}
