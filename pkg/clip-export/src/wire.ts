/**
 * The on-disk wire format consumed by the training side: a directory with
 * manifest.json plus raw little-endian row-major blobs (f32 arrays, u32
 * labels). Field names and byte-length rules are part of the contract.
 */
import * as fs from "node:fs";
import * as path from "node:path";

export const FORMAT_VERSION = 1;
export const MANIFEST_NAME = "manifest.json";

export interface BlobEntry {
  file: string;
  rows: number;
  cols: number;
  dtype: "f32" | "u32";
  bytes: number;
}

export function writeF32Blob(dir: string, name: string, rows: number, cols: number,
                             values: Float64Array | number[]): BlobEntry {
  const data = Array.isArray(values) ? Float64Array.from(values) : values;
  if (data.length !== rows * cols) {
    throw new Error(`blob ${name}: expected ${rows * cols} values, got ${data.length}`);
  }
  const buf = Buffer.alloc(rows * cols * 4);
  for (let i = 0; i < data.length; i++) {
    buf.writeFloatLE(data[i], i * 4);
  }
  fs.writeFileSync(path.join(dir, name), buf);
  return { file: name, rows, cols, dtype: "f32", bytes: buf.length };
}

export function writeU32Blob(dir: string, name: string, values: number[]): BlobEntry {
  const buf = Buffer.alloc(values.length * 4);
  values.forEach((v, i) => {
    if (!Number.isInteger(v) || v < 0) {
      throw new Error(`blob ${name}: labels must be non-negative integers, got ${v}`);
    }
    buf.writeUInt32LE(v, i * 4);
  });
  fs.writeFileSync(path.join(dir, name), buf);
  return { file: name, rows: values.length, cols: 1, dtype: "u32", bytes: buf.length };
}

export function writeManifest(dir: string, manifest: Record<string, unknown>): void {
  fs.writeFileSync(path.join(dir, MANIFEST_NAME), JSON.stringify(manifest, null, 2) + "\n");
}

/** Quantize through f32 so in-memory numbers equal what lands on disk. */
export function roundTripF32(values: Float64Array): Float64Array {
  return Float64Array.from(Float32Array.from(values));
}
