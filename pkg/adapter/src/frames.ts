/**
 * Binary frame codec.
 *
 * Every message is one frame: a 23-byte header followed by a row-major
 * payload.
 *
 *   offset  size  field
 *   0       4     magic "HSAL"
 *   4       1     protocol version, currently 1
 *   5       1     role: 1 = coarse request, 2 = refine request
 *   6       4     width, u32 little-endian
 *   10      4     height, u32 little-endian
 *   14      1     channels: 3 = RGB bytes, 1 = float32 map
 *   15      8     payload length in bytes, u64 little-endian
 *
 * RGB payloads are width*height*3 bytes; map payloads are width*height
 * IEEE-754 little-endian float32 values. A malformed frame is signaled by
 * throwing FrameError; the session layer responds by closing the stream.
 */

import type { Readable } from 'node:stream';

export const MAGIC = Buffer.from('HSAL', 'ascii');
export const VERSION = 1;
export const ROLE_COARSE = 1;
export const ROLE_REFINE = 2;
export const HEADER_SIZE = 23;

export class FrameError extends Error {}

export interface Frame {
  role: number;
  width: number;
  height: number;
  channels: number;
  payload: Buffer;
}

function itemSize(channels: number): number {
  return channels === 3 ? 1 : 4;
}

export function expectedPayloadLength(width: number, height: number, channels: number): number {
  return width * height * channels * itemSize(channels);
}

export function parseHeader(header: Buffer): Omit<Frame, 'payload'> & { payloadLength: number } {
  if (header.length !== HEADER_SIZE) {
    throw new FrameError(`short header: ${header.length} bytes`);
  }
  if (!header.subarray(0, 4).equals(MAGIC)) {
    throw new FrameError(`bad magic ${JSON.stringify(header.subarray(0, 4).toString('latin1'))}`);
  }
  const version = header.readUInt8(4);
  if (version !== VERSION) {
    throw new FrameError(`unsupported protocol version ${version}`);
  }
  const role = header.readUInt8(5);
  if (role !== ROLE_COARSE && role !== ROLE_REFINE) {
    throw new FrameError(`unknown role ${role}`);
  }
  const width = header.readUInt32LE(6);
  const height = header.readUInt32LE(10);
  const channels = header.readUInt8(14);
  if (channels !== 3 && channels !== 1) {
    throw new FrameError(`unknown channel count ${channels}`);
  }
  if (width < 1 || height < 1) {
    throw new FrameError(`bad dimensions ${width}x${height}`);
  }
  const payloadLength = Number(header.readBigUInt64LE(15));
  if (payloadLength !== expectedPayloadLength(width, height, channels)) {
    throw new FrameError(
      `payload length ${payloadLength} does not match ${width}x${height}x${channels}`,
    );
  }
  return { role, width, height, channels, payloadLength };
}

export function encodeFrame(frame: Frame): Buffer {
  const expected = expectedPayloadLength(frame.width, frame.height, frame.channels);
  if (frame.payload.length !== expected) {
    throw new FrameError(
      `payload of ${frame.payload.length} bytes does not match ` +
        `${frame.width}x${frame.height}x${frame.channels}`,
    );
  }
  const header = Buffer.alloc(HEADER_SIZE);
  MAGIC.copy(header, 0);
  header.writeUInt8(VERSION, 4);
  header.writeUInt8(frame.role, 5);
  header.writeUInt32LE(frame.width, 6);
  header.writeUInt32LE(frame.height, 10);
  header.writeUInt8(frame.channels, 14);
  header.writeBigUInt64LE(BigInt(frame.payload.length), 15);
  return Buffer.concat([header, frame.payload]);
}

/**
 * Pull-based reader over a Node stream: readExact awaits until exactly n
 * bytes are available and throws FrameError once the stream ends short.
 */
export class StreamReader {
  private chunks: Buffer[] = [];
  private buffered = 0;
  private ended = false;
  private wake: (() => void) | null = null;

  constructor(stream: Readable) {
    stream.on('data', (chunk: Buffer) => {
      this.chunks.push(chunk);
      this.buffered += chunk.length;
      this.notify();
    });
    stream.on('end', () => {
      this.ended = true;
      this.notify();
    });
    stream.on('error', () => {
      this.ended = true;
      this.notify();
    });
  }

  private notify(): void {
    if (this.wake) {
      const resolve = this.wake;
      this.wake = null;
      resolve();
    }
  }

  async readExact(n: number): Promise<Buffer> {
    while (this.buffered < n) {
      if (this.ended) {
        throw new FrameError(`stream ended with ${this.buffered} of ${n} bytes`);
      }
      await new Promise<void>((resolve) => {
        this.wake = resolve;
      });
    }
    const joined = this.chunks.length === 1 ? this.chunks[0]! : Buffer.concat(this.chunks);
    this.chunks = joined.length > n ? [joined.subarray(n)] : [];
    this.buffered = joined.length - n;
    return joined.subarray(0, n);
  }
}

export async function readFrame(reader: StreamReader): Promise<Frame> {
  const header = parseHeader(await reader.readExact(HEADER_SIZE));
  const payload = await reader.readExact(header.payloadLength);
  return {
    role: header.role,
    width: header.width,
    height: header.height,
    channels: header.channels,
    payload,
  };
}
