/**
 * Walks an image-folder dataset (root/class/image.png) or a class list and
 * writes dataset / prompts directories in the training side's wire format.
 */
import * as fs from "node:fs";
import * as path from "node:path";

import { EncoderSpec, embedImage, embedText, preprocessingDescription } from "./encoder.js";
import { decodePng, resizeRgb } from "./png.js";
import { renderPrompts } from "./prompts.js";
import { BlobEntry, FORMAT_VERSION, roundTripF32, writeF32Blob, writeManifest,
         writeU32Blob } from "./wire.js";

export interface ExportDatasetJob {
  imageRoot: string;
  domain: string;
  out: string;
  encoder: EncoderSpec;
  /** target exports keep ground truth in eval_labels so training cannot read it */
  role: "source" | "target";
  /** what to put in inputs.f32: the image embedding itself, or raw patch pixels */
  inputsFrom: "clip" | "pixels";
  batchSize: number;
  warn: (message: string) => void;
}

export interface ExportDatasetResult {
  out: string;
  classes: string[];
  numImages: number;
  skipped: number;
  dimInput: number;
  dimClip: number;
}

export function listClasses(imageRoot: string): string[] {
  if (!fs.existsSync(imageRoot) || !fs.statSync(imageRoot).isDirectory()) {
    throw new Error(`image root ${imageRoot} is not a directory`);
  }
  const classes = fs.readdirSync(imageRoot, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (classes.length === 0) {
    throw new Error(`image root ${imageRoot} has no class folders`);
  }
  return classes;
}

export function exportDataset(job: ExportDatasetJob): ExportDatasetResult {
  const classes = listClasses(job.imageRoot);
  const queue: Array<{ file: string; label: number }> = [];
  for (let label = 0; label < classes.length; label++) {
    const dir = path.join(job.imageRoot, classes[label]);
    for (const name of fs.readdirSync(dir).sort()) {
      const file = path.join(dir, name);
      if (fs.statSync(file).isFile()) queue.push({ file, label });
    }
  }

  const embeddings: Float64Array[] = [];
  const inputs: Float64Array[] = [];
  const labels: number[] = [];
  let skipped = 0;
  const batch = Math.max(1, job.batchSize);
  for (let start = 0; start < queue.length; start += batch) {
    for (const item of queue.slice(start, start + batch)) {
      let patch: Float64Array;
      try {
        patch = resizeRgb(decodePng(fs.readFileSync(item.file)), job.encoder.patch);
      } catch (err) {
        skipped += 1;
        job.warn(`skipping unreadable image ${item.file}: ${(err as Error).message}`);
        continue;
      }
      embeddings.push(roundTripF32(embedImage(job.encoder, patch)));
      inputs.push(job.inputsFrom === "pixels" ? roundTripF32(patch) : embeddings[embeddings.length - 1]);
      labels.push(item.label);
    }
  }
  if (embeddings.length === 0) {
    throw new Error(`no usable images under ${job.imageRoot} (${skipped} skipped)`);
  }

  const n = embeddings.length;
  const dimClip = job.encoder.dim;
  const dimInput = inputs[0].length;
  const flatInputs = new Float64Array(n * dimInput);
  const flatClip = new Float64Array(n * dimClip);
  inputs.forEach((row, i) => flatInputs.set(row, i * dimInput));
  embeddings.forEach((row, i) => flatClip.set(row, i * dimClip));

  fs.mkdirSync(job.out, { recursive: true });
  const blobs: Record<string, BlobEntry> = {
    inputs: writeF32Blob(job.out, "inputs.f32", n, dimInput, flatInputs),
    clip: writeF32Blob(job.out, "clip.f32", n, dimClip, flatClip),
  };
  const labelBlob = job.role === "target" ? "eval_labels" : "labels";
  blobs[labelBlob] = writeU32Blob(job.out, `${labelBlob}.u32`, labels);

  writeManifest(job.out, {
    version: FORMAT_VERSION,
    kind: "dataset",
    domain: job.domain,
    class_names: classes,
    num_samples: n,
    dim_input: dimInput,
    dim_clip: dimClip,
    blobs,
    encoder: job.encoder.variant,
    preprocessing: preprocessingDescription(job.encoder),
    inputs_from: job.inputsFrom,
    skipped_images: skipped,
  });
  return { out: job.out, classes, numImages: n, skipped, dimInput, dimClip };
}

export interface ExportPromptsJob {
  classNames: string[];
  sourceDomain: string;
  targetDomain: string;
  encoder: EncoderSpec;
  out: string;
}

export function exportPrompts(job: ExportPromptsJob): { out: string; numClasses: number } {
  const sets = {
    source: renderPrompts(job.classNames, job.sourceDomain),
    target: renderPrompts(job.classNames, job.targetDomain),
    agnostic: renderPrompts(job.classNames),
  };
  const k = job.classNames.length;
  const dim = job.encoder.dim;
  fs.mkdirSync(job.out, { recursive: true });
  const blobs: Record<string, BlobEntry> = {};
  for (const [name, prompts] of Object.entries(sets)) {
    const flat = new Float64Array(k * dim);
    prompts.forEach((prompt, i) => flat.set(roundTripF32(embedText(job.encoder, prompt)), i * dim));
    blobs[name] = writeF32Blob(job.out, `${name}.f32`, k, dim, flat);
  }
  writeManifest(job.out, {
    version: FORMAT_VERSION,
    kind: "prompts",
    class_names: job.classNames,
    dim_clip: dim,
    source_domain: job.sourceDomain,
    target_domain: job.targetDomain,
    blobs,
    encoder: job.encoder.variant,
  });
  return { out: job.out, numClasses: k };
}

/** Zero-shot accuracy computed inside the export tool (for cross-checks). */
export function zeroShotAccuracy(embeddings: Float64Array[], labels: number[],
                                 textRows: Float64Array[]): number {
  let hits = 0;
  for (let i = 0; i < embeddings.length; i++) {
    let best = 0;
    let bestCos = -Infinity;
    for (let kk = 0; kk < textRows.length; kk++) {
      let dot = 0;
      let ne = 0;
      let nt = 0;
      const e = embeddings[i];
      const t = textRows[kk];
      for (let j = 0; j < e.length; j++) {
        dot += e[j] * t[j];
        ne += e[j] * e[j];
        nt += t[j] * t[j];
      }
      const cos = dot / ((Math.sqrt(ne) + 1e-12) * (Math.sqrt(nt) + 1e-12));
      if (cos > bestCos) {
        bestCos = cos;
        best = kk;
      }
    }
    if (best === labels[i]) hits += 1;
  }
  return hits / embeddings.length;
}
