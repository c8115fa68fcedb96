/**
 * Minimal PNG decoder: 8-bit depth, color types 0/2/4/6, no interlacing.
 * Enough to read ordinary exported photos; anything else is reported as
 * unreadable so the caller can skip it.
 */
import * as zlib from "node:zlib";

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export interface RgbImage {
  width: number;
  height: number;
  /** row-major RGB triples in [0, 1] */
  pixels: Float64Array;
}

function channelsFor(colorType: number): number {
  switch (colorType) {
    case 0: return 1; // grayscale
    case 2: return 3; // rgb
    case 4: return 2; // gray + alpha
    case 6: return 4; // rgba
    default:
      throw new Error(`unsupported PNG color type ${colorType}`);
  }
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export function decodePng(data: Buffer): RgbImage {
  if (data.length < 8 || !data.subarray(0, 8).equals(SIGNATURE)) {
    throw new Error("not a PNG file");
  }
  let offset = 8;
  let width = 0;
  let height = 0;
  let colorType = -1;
  const idat: Buffer[] = [];
  while (offset + 8 <= data.length) {
    const length = data.readUInt32BE(offset);
    const type = data.toString("ascii", offset + 4, offset + 8);
    const body = data.subarray(offset + 8, offset + 8 + length);
    if (body.length < length) throw new Error("truncated PNG chunk");
    if (type === "IHDR") {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      const bitDepth = body.readUInt8(8);
      colorType = body.readUInt8(9);
      const interlace = body.readUInt8(12);
      if (bitDepth !== 8) throw new Error(`unsupported PNG bit depth ${bitDepth}`);
      if (interlace !== 0) throw new Error("interlaced PNG not supported");
      channelsFor(colorType);
    } else if (type === "IDAT") {
      idat.push(body);
    } else if (type === "IEND") {
      break;
    }
    offset += 12 + length;
  }
  if (width === 0 || height === 0 || colorType < 0) throw new Error("PNG missing IHDR");
  if (idat.length === 0) throw new Error("PNG missing IDAT");

  const channels = channelsFor(colorType);
  const raw = zlib.inflateSync(Buffer.concat(idat));
  const stride = width * channels;
  if (raw.length !== height * (stride + 1)) {
    throw new Error("PNG pixel data has unexpected length");
  }

  const lines = Buffer.alloc(height * stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const src = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const out = lines.subarray(y * stride, (y + 1) * stride);
    const prev = y > 0 ? lines.subarray((y - 1) * stride, y * stride) : null;
    for (let x = 0; x < stride; x++) {
      const left = x >= channels ? out[x - channels] : 0;
      const up = prev ? prev[x] : 0;
      const upLeft = prev && x >= channels ? prev[x - channels] : 0;
      let value = src[x];
      switch (filter) {
        case 0: break;
        case 1: value = (value + left) & 0xff; break;
        case 2: value = (value + up) & 0xff; break;
        case 3: value = (value + ((left + up) >> 1)) & 0xff; break;
        case 4: value = (value + paeth(left, up, upLeft)) & 0xff; break;
        default:
          throw new Error(`unsupported PNG filter ${filter}`);
      }
      out[x] = value;
    }
  }

  const pixels = new Float64Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    const base = i * channels;
    let r: number, g: number, b: number;
    if (channels === 1) {
      r = g = b = lines[base];
    } else if (channels === 2) {
      r = g = b = lines[base];
    } else {
      r = lines[base];
      g = lines[base + 1];
      b = lines[base + 2];
    }
    pixels[i * 3] = r / 255;
    pixels[i * 3 + 1] = g / 255;
    pixels[i * 3 + 2] = b / 255;
  }
  return { width, height, pixels };
}

/** Bilinear resize to a square patch; output is row-major RGB in [0, 1]. */
export function resizeRgb(image: RgbImage, size: number): Float64Array {
  const out = new Float64Array(size * size * 3);
  const sx = image.width / size;
  const sy = image.height / size;
  for (let y = 0; y < size; y++) {
    const fy = Math.min((y + 0.5) * sy - 0.5, image.height - 1);
    const y0 = Math.max(0, Math.floor(fy));
    const y1 = Math.min(image.height - 1, y0 + 1);
    const wy = fy - y0;
    for (let x = 0; x < size; x++) {
      const fx = Math.min((x + 0.5) * sx - 0.5, image.width - 1);
      const x0 = Math.max(0, Math.floor(fx));
      const x1 = Math.min(image.width - 1, x0 + 1);
      const wx = fx - x0;
      for (let c = 0; c < 3; c++) {
        const p00 = image.pixels[(y0 * image.width + x0) * 3 + c];
        const p01 = image.pixels[(y0 * image.width + x1) * 3 + c];
        const p10 = image.pixels[(y1 * image.width + x0) * 3 + c];
        const p11 = image.pixels[(y1 * image.width + x1) * 3 + c];
        out[(y * size + x) * 3 + c] =
          p00 * (1 - wy) * (1 - wx) + p01 * (1 - wy) * wx +
          p10 * wy * (1 - wx) + p11 * wy * wx;
      }
    }
  }
  return out;
}
