/**
 * Request/response session loop.
 *
 * One session serves one peer: a coarse request is a single RGB frame, a
 * refine request is an RGB frame followed by a map frame, and each request
 * gets exactly one map response with the request's dimensions and role.
 * Requests are handled strictly one at a time. On any malformed frame the
 * session simply ends (no error frame exists in the protocol); the caller
 * then closes the underlying stream or socket.
 */

import type { Readable, Writable } from 'node:stream';

import {
  Frame,
  FrameError,
  ROLE_COARSE,
  ROLE_REFINE,
  StreamReader,
  encodeFrame,
  readFrame,
} from './frames';
import { coarseMap, refineMap } from './model';

async function writeAll(output: Writable, data: Buffer): Promise<void> {
  if (!output.write(data)) {
    await new Promise<void>((resolve, reject) => {
      output.once('drain', resolve);
      output.once('error', reject);
    });
  }
}

async function readGuidance(reader: StreamReader, image: Frame): Promise<Frame> {
  const guidance = await readFrame(reader);
  if (guidance.channels !== 1) {
    throw new FrameError(`guidance frame must be a map, got channels=${guidance.channels}`);
  }
  if (guidance.role !== image.role) {
    throw new FrameError(`guidance role ${guidance.role} does not match request ${image.role}`);
  }
  if (guidance.width !== image.width || guidance.height !== image.height) {
    throw new FrameError(
      `guidance ${guidance.width}x${guidance.height} does not match image ` +
        `${image.width}x${image.height}`,
    );
  }
  return guidance;
}

/**
 * Serve requests until the input closes or a frame is malformed. Returns
 * normally in both cases; transport errors other than malformed frames
 * propagate to the caller.
 */
export async function serveSession(input: Readable, output: Writable): Promise<void> {
  const reader = new StreamReader(input);
  for (;;) {
    let response: Buffer;
    try {
      const image = await readFrame(reader);
      if (image.channels !== 3) {
        throw new FrameError('a request must start with an RGB frame');
      }
      let payload: Buffer;
      if (image.role === ROLE_COARSE) {
        payload = coarseMap(image.payload, image.width, image.height);
      } else if (image.role === ROLE_REFINE) {
        const guidance = await readGuidance(reader, image);
        payload = refineMap(guidance.payload);
      } else {
        throw new FrameError(`unknown role ${image.role}`);
      }
      response = encodeFrame({
        role: image.role,
        width: image.width,
        height: image.height,
        channels: 1,
        payload,
      });
    } catch (err) {
      if (err instanceof FrameError) {
        return; // malformed or closed: end the session with no response
      }
      throw err;
    }
    await writeAll(output, response);
  }
}
