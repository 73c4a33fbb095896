/**
 * Seeded VGG-16-shaped TFJS artifacts for tests and offline runs: a
 * model.json plus binary shards holding He-scaled random conv weights in
 * the source layout ([kh, kw, in, out]). Deterministic for a given seed.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { endianness } from "node:os";
import { join } from "node:path";

import { KERNEL_SIZE, VGG16_CONV_LAYERS } from "./vgg16.js";

const SHARD_BYTES = 16 * 1024 * 1024;

/** Deterministic 32-bit PRNG (mulberry32). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussianPair(rand: () => number): [number, number] {
  // Box-Muller; rand() is in [0, 1), shift to (0, 1] for the log.
  const u = 1 - rand();
  const v = rand();
  const r = Math.sqrt(-2 * Math.log(u));
  return [r * Math.cos(2 * Math.PI * v), r * Math.sin(2 * Math.PI * v)];
}

function heKernel(rand: () => number, fanIn: number, count: number): Float32Array {
  const std = Math.sqrt(2 / fanIn);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i += 2) {
    const [a, b] = gaussianPair(rand);
    out[i] = a * std;
    if (i + 1 < count) out[i + 1] = b * std;
  }
  return out;
}

function leBytes(data: Float32Array): Buffer {
  if (endianness() === "LE") {
    return Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  }
  const buf = Buffer.alloc(data.length * 4);
  for (let i = 0; i < data.length; i++) buf.writeFloatLE(data[i]!, i * 4);
  return buf;
}

export interface FixturePaths {
  dir: string;
  modelJson: string;
  shards: string[];
}

/** Write model.json + shards for a random VGG-16-shaped backbone. */
export function makeFixture(dir: string, seed = 0): FixturePaths {
  mkdirSync(dir, { recursive: true });
  const rand = mulberry32(seed);
  const weights: { name: string; shape: number[]; dtype: string }[] = [];
  const payloads: Buffer[] = [];
  for (const l of VGG16_CONV_LAYERS) {
    const fanIn = l.inChannels * KERNEL_SIZE * KERNEL_SIZE;
    const kernel = heKernel(rand, fanIn, fanIn * l.filters);
    weights.push({
      name: `${l.name}/kernel`,
      shape: [KERNEL_SIZE, KERNEL_SIZE, l.inChannels, l.filters],
      dtype: "float32",
    });
    payloads.push(leBytes(kernel));
    weights.push({ name: `${l.name}/bias`, shape: [l.filters], dtype: "float32" });
    payloads.push(leBytes(new Float32Array(l.filters)));
  }
  const blob = Buffer.concat(payloads);
  const shardCount = Math.max(1, Math.ceil(blob.length / SHARD_BYTES));
  const shards: string[] = [];
  for (let i = 0; i < shardCount; i++) {
    const name = `group1-shard${i + 1}of${shardCount}.bin`;
    writeFileSync(join(dir, name), blob.subarray(i * SHARD_BYTES, (i + 1) * SHARD_BYTES));
    shards.push(name);
  }
  const modelJson = join(dir, "model.json");
  writeFileSync(
    modelJson,
    JSON.stringify(
      {
        format: "layers-model",
        generatedBy: "vgg16-cnwf-exporter fixture",
        weightsManifest: [{ paths: shards, weights }],
      },
      null,
      2,
    ),
    "utf-8",
  );
  return { dir, modelJson, shards };
}
