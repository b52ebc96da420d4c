/**
 * Length-prefixed JSON framing: 4-byte big-endian payload length followed
 * by UTF-8 JSON. The decoder is incremental so it works directly off
 * socket `data` events regardless of how the stream is chunked.
 */

import { MAX_MESSAGE_BYTES } from "./protocol.js";

export function encodeMessage(msg: unknown): Buffer {
  const body = Buffer.from(JSON.stringify(msg), "utf-8");
  if (body.length > MAX_MESSAGE_BYTES) {
    throw new RangeError(`message of ${body.length} bytes exceeds the frame limit`);
  }
  const head = Buffer.alloc(4);
  head.writeUInt32BE(body.length, 0);
  return Buffer.concat([head, body]);
}

export class MessageDecoder {
  private pending: Buffer = Buffer.alloc(0);

  /** Feed raw bytes; returns every complete message they finish. */
  push(chunk: Buffer): unknown[] {
    this.pending = this.pending.length === 0 ? chunk : Buffer.concat([this.pending, chunk]);
    const out: unknown[] = [];
    for (;;) {
      if (this.pending.length < 4) break;
      const size = this.pending.readUInt32BE(0);
      if (size > MAX_MESSAGE_BYTES) {
        throw new RangeError(`incoming frame of ${size} bytes exceeds the limit`);
      }
      if (this.pending.length < 4 + size) break;
      const body = this.pending.subarray(4, 4 + size);
      this.pending = this.pending.subarray(4 + size);
      out.push(JSON.parse(body.toString("utf-8")));
    }
    return out;
  }

  /** Bytes buffered but not yet forming a complete frame. */
  get buffered(): number {
    return this.pending.length;
  }
}
