#!/usr/bin/env node
/**
 * clip-export dataset --image-root <dir> --domain <name> --out <dir>
 *     [--model builtin:tiny | <checkpoint dir>] [--role source|target]
 *     [--inputs-from clip|pixels] [--batch-size N]
 * clip-export prompts --classes-file <file> | --image-root <dir>
 *     --source-domain <name> --target-domain <name> --out <dir> [--model ...]
 */
import * as fs from "node:fs";
import * as process from "node:process";

import { loadEncoder } from "./encoder.js";
import { exportDataset, exportPrompts, listClasses } from "./exporter.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`expected --flag value pairs, got ${key}`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) throw new Error(`missing required flag --${name}`);
  return value;
}

function runDataset(flags: Map<string, string>): number {
  const role = flags.get("role") ?? "source";
  if (role !== "source" && role !== "target") {
    throw new Error(`--role must be source or target, got ${role}`);
  }
  const inputsFrom = flags.get("inputs-from") ?? "clip";
  if (inputsFrom !== "clip" && inputsFrom !== "pixels") {
    throw new Error(`--inputs-from must be clip or pixels, got ${inputsFrom}`);
  }
  const result = exportDataset({
    imageRoot: required(flags, "image-root"),
    domain: required(flags, "domain"),
    out: required(flags, "out"),
    encoder: loadEncoder(flags.get("model") ?? "builtin:tiny"),
    role,
    inputsFrom,
    batchSize: Number(flags.get("batch-size") ?? "32"),
    warn: (message) => console.error(`warning: ${message}`),
  });
  console.log(JSON.stringify({
    out: result.out,
    classes: result.classes,
    num_images: result.numImages,
    skipped: result.skipped,
    dim_input: result.dimInput,
    dim_clip: result.dimClip,
    role,
  }, null, 2));
  return 0;
}

function runPrompts(flags: Map<string, string>): number {
  let classNames: string[];
  const classesFile = flags.get("classes-file");
  if (classesFile !== undefined) {
    classNames = fs.readFileSync(classesFile, "utf-8")
      .split("\n").map((line) => line.trim()).filter((line) => line.length > 0);
  } else if (flags.has("image-root")) {
    classNames = listClasses(required(flags, "image-root"));
  } else {
    throw new Error("prompts needs --classes-file or --image-root");
  }
  const result = exportPrompts({
    classNames,
    sourceDomain: required(flags, "source-domain"),
    targetDomain: required(flags, "target-domain"),
    encoder: loadEncoder(flags.get("model") ?? "builtin:tiny"),
    out: required(flags, "out"),
  });
  console.log(JSON.stringify({ out: result.out, num_classes: result.numClasses }, null, 2));
  return 0;
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command === "dataset") return runDataset(parseFlags(rest));
    if (command === "prompts") return runPrompts(parseFlags(rest));
    console.error("usage: clip-export <dataset|prompts> --flag value ...");
    return 2;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
