/**
 * Reader for TFJS model artifacts: a model.json whose `weightsManifest`
 * lists named float32 tensors stored back-to-back in binary shard files.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { endianness } from "node:os";

export interface SourceTensor {
  shape: number[];
  data: Float32Array;
}

interface ManifestWeight {
  name: string;
  shape: number[];
  dtype: string;
}

interface ManifestGroup {
  paths: string[];
  weights: ManifestWeight[];
}

export class SourceModelError extends Error {}

function toFloat32(buf: Buffer, count: number, what: string): Float32Array {
  if (buf.length < count * 4) {
    throw new SourceModelError(`${what}: shard data ends after ${buf.length} bytes`);
  }
  if (endianness() === "LE") {
    // Copy so the view owns aligned memory independent of the shard buffer.
    return new Float32Array(new Uint8Array(buf.subarray(0, count * 4)).buffer);
  }
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) out[i] = buf.readFloatLE(i * 4);
  return out;
}

/** Load every tensor of a model.json (+ shards) into memory by name. */
export function readTfjsWeights(modelJsonPath: string): Map<string, SourceTensor> {
  let parsed: unknown;
  try {
    parsed = JSON.parse(readFileSync(modelJsonPath, "utf-8"));
  } catch (err) {
    throw new SourceModelError(`${modelJsonPath}: ${(err as Error).message}`);
  }
  const groups = (parsed as { weightsManifest?: ManifestGroup[] }).weightsManifest;
  if (!Array.isArray(groups) || groups.length === 0) {
    throw new SourceModelError(`${modelJsonPath}: no weightsManifest`);
  }
  const base = dirname(modelJsonPath);
  const tensors = new Map<string, SourceTensor>();
  for (const group of groups) {
    const shards = group.paths.map((p) => readFileSync(join(base, p)));
    let blob = Buffer.concat(shards);
    for (const w of group.weights) {
      if (w.dtype !== "float32") {
        throw new SourceModelError(`tensor "${w.name}": unsupported dtype ${w.dtype}`);
      }
      const count = w.shape.reduce((a, b) => a * b, 1);
      tensors.set(w.name, { shape: w.shape, data: toFloat32(blob, count, w.name) });
      blob = blob.subarray(count * 4);
    }
    if (blob.length !== 0) {
      throw new SourceModelError(
        `${group.paths.join("+")}: ${blob.length} shard bytes left over after manifest`,
      );
    }
  }
  return tensors;
}
