/**
 * Built-in demo model.
 *
 * The coarse role computes Gaussian-blurred luminance contrast against the
 * image's mean luminance, min-max normalized to [0, 1]; an image with no
 * contrast anywhere maps to all zeros. The refine role echoes the guidance
 * map back unchanged. Both are fully deterministic.
 */

const BLUR_SIGMA = 2.0;

/** Rec.601 luminance of interleaved RGB bytes, scaled to [0, 1]. */
export function luminanceOf(rgb: Buffer, width: number, height: number): Float64Array {
  const out = new Float64Array(width * height);
  for (let i = 0; i < out.length; i++) {
    const r = rgb[3 * i]!;
    const g = rgb[3 * i + 1]!;
    const b = rgb[3 * i + 2]!;
    out[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
  }
  return out;
}

function gaussianKernel(sigma: number): Float64Array {
  const radius = Math.ceil(3 * sigma);
  const kernel = new Float64Array(2 * radius + 1);
  let total = 0;
  for (let i = -radius; i <= radius; i++) {
    const weight = Math.exp(-(i * i) / (2 * sigma * sigma));
    kernel[i + radius] = weight;
    total += weight;
  }
  for (let i = 0; i < kernel.length; i++) {
    kernel[i] = kernel[i]! / total;
  }
  return kernel;
}

/** Separable Gaussian blur with edge clamping. */
export function gaussianBlur(
  values: Float64Array,
  width: number,
  height: number,
  sigma: number = BLUR_SIGMA,
): Float64Array {
  const kernel = gaussianKernel(sigma);
  const radius = (kernel.length - 1) / 2;
  const horizontal = new Float64Array(values.length);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      let acc = 0;
      for (let k = -radius; k <= radius; k++) {
        const sx = Math.min(width - 1, Math.max(0, x + k));
        acc += kernel[k + radius]! * values[y * width + sx]!;
      }
      horizontal[y * width + x] = acc;
    }
  }
  const out = new Float64Array(values.length);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      let acc = 0;
      for (let k = -radius; k <= radius; k++) {
        const sy = Math.min(height - 1, Math.max(0, y + k));
        acc += kernel[k + radius]! * horizontal[sy * width + x]!;
      }
      out[y * width + x] = acc;
    }
  }
  return out;
}

/** Coarse saliency as a little-endian float32 payload buffer. */
export function coarseMap(rgb: Buffer, width: number, height: number): Buffer {
  const lum = luminanceOf(rgb, width, height);
  let mean = 0;
  for (let i = 0; i < lum.length; i++) {
    mean += lum[i]!;
  }
  mean /= lum.length;
  const blurred = gaussianBlur(lum, width, height);
  let lo = Infinity;
  let hi = -Infinity;
  const contrast = new Float64Array(lum.length);
  for (let i = 0; i < contrast.length; i++) {
    const value = Math.abs(blurred[i]! - mean);
    contrast[i] = value;
    if (value < lo) lo = value;
    if (value > hi) hi = value;
  }
  const span = hi - lo;
  const payload = Buffer.alloc(contrast.length * 4);
  for (let i = 0; i < contrast.length; i++) {
    const value = span > 0 ? (contrast[i]! - lo) / span : 0;
    payload.writeFloatLE(value, i * 4);
  }
  return payload;
}

/** Refinement echoes the guidance payload back verbatim. */
export function refineMap(guidancePayload: Buffer): Buffer {
  return guidancePayload;
}
