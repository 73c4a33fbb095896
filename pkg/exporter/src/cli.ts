#!/usr/bin/env node
/**
 * One-shot converter: pretrained VGG-16 conv weights -> CNWF.
 *
 * Usage:
 *   vgg16-cnwf-exporter export --model <model.json> --out <backbone.cnwf>
 *   vgg16-cnwf-exporter make-fixture --out <dir> [--seed N]
 *
 * `export` reads TFJS artifacts (model.json plus binary shards), writes
 * the 26 frozen backbone tensors as CNWF, and emits `<out>.sums.txt`
 * with per-tensor SHA-256 checksums. `make-fixture` generates a seeded
 * random VGG-16-shaped source model for offline runs and tests.
 *
 * Exit codes: 0 success, 1 conversion error, 2 usage error.
 */

import { buildVgg16Manifest, exportWeights } from "./export.js";
import { makeFixture } from "./fixture.js";

const USAGE = `usage:
  vgg16-cnwf-exporter export --model <model.json> --out <backbone.cnwf>
  vgg16-cnwf-exporter make-fixture --out <dir> [--seed N]`;

function parseFlags(argv: string[], allowed: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i]!;
    const value = argv[i + 1];
    if (!allowed.includes(flag) || value === undefined) {
      throw new UsageError(`unexpected argument "${flag}"`);
    }
    flags.set(flag, value);
  }
  return flags;
}

class UsageError extends Error {}

function require(flags: Map<string, string>, flag: string): string {
  const value = flags.get(flag);
  if (value === undefined) throw new UsageError(`${flag} is required`);
  return value;
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command === "export") {
      const flags = parseFlags(rest, ["--model", "--out"]);
      const manifest = buildVgg16Manifest(require(flags, "--model"), require(flags, "--out"));
      const summary = exportWeights(manifest);
      console.log(`entries ${summary.entries}`);
      console.log(`parameters ${summary.parameters}`);
      console.log(`bytes ${summary.bytes}`);
      console.log(`weights ${summary.outPath}`);
      console.log(`checksums ${summary.sumsPath}`);
      return 0;
    }
    if (command === "make-fixture") {
      const flags = parseFlags(rest, ["--out", "--seed"]);
      const seed = Number(flags.get("--seed") ?? "0");
      if (!Number.isInteger(seed)) throw new UsageError(`--seed must be an integer`);
      const fixture = makeFixture(require(flags, "--out"), seed);
      console.log(`model ${fixture.modelJson}`);
      console.log(`shards ${fixture.shards.length}`);
      return 0;
    }
    if (command === "--help" || command === "-h" || command === undefined) {
      console.log(USAGE);
      return command === undefined ? 2 : 0;
    }
    throw new UsageError(`unknown command "${command}"`);
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`error: ${err.message}`);
      console.error(USAGE);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
