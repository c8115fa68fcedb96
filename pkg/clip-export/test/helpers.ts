/** Fixture helpers: a tiny PNG writer and an image-folder tree builder. */
import * as fs from "node:fs";
import * as path from "node:path";
import * as zlib from "node:zlib";

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let crc = 0xffffffff;
  for (const byte of buf) {
    crc = CRC_TABLE[(crc ^ byte) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

function chunk(type: string, body: Buffer): Buffer {
  const length = Buffer.alloc(4);
  length.writeUInt32BE(body.length);
  const typed = Buffer.concat([Buffer.from(type, "ascii"), body]);
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(typed));
  return Buffer.concat([length, typed, crc]);
}

/** Encode 8-bit RGB pixels (row-major triples in [0, 255]) as a PNG. */
export function encodePng(width: number, height: number, rgb: Uint8Array): Buffer {
  if (rgb.length !== width * height * 3) {
    throw new Error("pixel buffer size mismatch");
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr.writeUInt8(8, 8);   // bit depth
  ihdr.writeUInt8(2, 9);   // color type: RGB
  ihdr.writeUInt8(0, 10);  // compression
  ihdr.writeUInt8(0, 11);  // filter method
  ihdr.writeUInt8(0, 12);  // no interlace
  const stride = width * 3;
  const raw = Buffer.alloc(height * (stride + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter type none
    for (let x = 0; x < stride; x++) {
      raw[y * (stride + 1) + 1 + x] = rgb[y * stride + x];
    }
  }
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", zlib.deflateSync(raw)),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}

/** Deterministic colorful test image: class-dependent gradient. */
export function syntheticImage(width: number, height: number, hue: number): Uint8Array {
  const rgb = new Uint8Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 3;
      rgb[i] = (hue * 83 + x * 9) % 256;
      rgb[i + 1] = (hue * 47 + y * 13) % 256;
      rgb[i + 2] = (hue * 151 + x * 3 + y * 5) % 256;
    }
  }
  return rgb;
}

/** Build a 2-class / 4-image fixture tree: root/<class>/<image>.png */
export function buildFixtureTree(root: string, classes = ["mug", "pen"]): string {
  fs.mkdirSync(root, { recursive: true });
  classes.forEach((cls, ci) => {
    const dir = path.join(root, cls);
    fs.mkdirSync(dir, { recursive: true });
    for (let i = 0; i < 2; i++) {
      const png = encodePng(24, 18, syntheticImage(24, 18, ci * 10 + i * 3 + 1));
      fs.writeFileSync(path.join(dir, `img_${i}.png`), png);
    }
  });
  return root;
}
