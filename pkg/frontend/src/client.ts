/**
 * Socket client for the engine endpoint. The protocol is strict
 * request/reply, so requests queue their resolvers in FIFO order; the
 * decoder may surface several replies from one data event and each one
 * settles the oldest pending request.
 *
 * Geometry replies are additionally offered to a LatestFrameBuffer so a
 * render loop polling `latest()` always sees the newest acknowledged
 * state and never a stale frame.
 */

import * as net from "node:net";

import { MessageDecoder, encodeMessage } from "./framing.js";
import { GeometryFrame, LatestFrameBuffer, parseGeometry } from "./geometry.js";
import {
  ClientMessage,
  EditPayload,
  ErrorMessage,
  GeometryMessage,
  PROTOCOL_VERSION,
  ServerMessage,
  isError,
  isGeometry,
  isHello,
} from "./protocol.js";

export class EngineError extends Error {
  constructor(public code: string, text: string) {
    super(`${code}: ${text}`);
    this.name = "EngineError";
  }
}

interface Pending {
  resolve: (msg: ServerMessage) => void;
  reject: (err: Error) => void;
}

export class EngineClient {
  private socket: net.Socket | null = null;
  private decoder = new MessageDecoder();
  private pending: Pending[] = [];
  private closed = false;
  readonly frames = new LatestFrameBuffer();

  async connect(host: string, port: number): Promise<void> {
    if (this.socket !== null) throw new Error("already connected");
    const socket = new net.Socket();
    this.socket = socket;
    socket.on("data", (chunk) => this.onData(chunk));
    socket.on("error", (err) => this.failAll(err));
    socket.on("close", () => {
      this.closed = true;
      this.failAll(new Error("connection closed"));
    });
    await new Promise<void>((resolve, reject) => {
      socket.once("error", reject);
      socket.connect(port, host, () => {
        socket.removeListener("error", reject);
        resolve();
      });
    });
  }

  private onData(chunk: Buffer): void {
    let msgs: unknown[];
    try {
      msgs = this.decoder.push(chunk);
    } catch (err) {
      this.failAll(err instanceof Error ? err : new Error(String(err)));
      return;
    }
    for (const msg of msgs) {
      if (isGeometry(msg)) this.frames.offer(parseGeometry(msg));
      const waiter = this.pending.shift();
      if (waiter !== undefined) waiter.resolve(msg as ServerMessage);
    }
  }

  private failAll(err: Error): void {
    const waiters = this.pending;
    this.pending = [];
    for (const w of waiters) w.reject(err);
  }

  private request(msg: ClientMessage): Promise<ServerMessage> {
    const socket = this.socket;
    if (socket === null || this.closed) {
      return Promise.reject(new Error("not connected"));
    }
    return new Promise<ServerMessage>((resolve, reject) => {
      this.pending.push({ resolve, reject });
      socket.write(encodeMessage(msg));
    });
  }

  private async requestGeometry(msg: ClientMessage): Promise<GeometryFrame> {
    const reply = await this.request(msg);
    if (isError(reply)) throw new EngineError(reply.code, reply.text);
    if (!isGeometry(reply)) throw new Error(`unexpected reply ${String((reply as { type?: string }).type)}`);
    return parseGeometry(reply as GeometryMessage);
  }

  async hello(): Promise<void> {
    const reply = await this.request({ type: "HELLO", version: PROTOCOL_VERSION });
    if (isError(reply)) throw new EngineError(reply.code, reply.text);
    if (!isHello(reply)) throw new Error("engine did not greet back");
  }

  /** Load a rig; the reply carries topology along with positions. */
  load(rig: string, config?: Record<string, unknown>): Promise<GeometryFrame> {
    const msg: ClientMessage =
      config === undefined ? { type: "LOAD", rig } : { type: "LOAD", rig, config };
    return this.requestGeometry(msg);
  }

  edit(edit: EditPayload): Promise<GeometryFrame> {
    return this.requestGeometry({ type: "EDIT", edit });
  }

  /**
   * Like edit, but a rejection is returned instead of thrown so a drag
   * loop can revert to the last acknowledged frame without unwinding.
   */
  async tryEdit(edit: EditPayload): Promise<GeometryFrame | ErrorMessage> {
    const reply = await this.request({ type: "EDIT", edit });
    if (isError(reply)) return reply;
    return parseGeometry(reply as GeometryMessage);
  }

  snapshot(name: string): Promise<GeometryFrame> {
    return this.requestGeometry({ type: "SNAPSHOT_REQUEST", name });
  }

  /** Latest acknowledged frame, or null if none arrived since last call. */
  latest(): GeometryFrame | null {
    return this.frames.take();
  }

  async close(): Promise<void> {
    const socket = this.socket;
    if (socket === null) return;
    this.socket = null;
    socket.write(encodeMessage({ type: "BYE" }));
    await new Promise<void>((resolve) => socket.end(resolve));
  }
}
