/**
 * Export pretrained VGG-16 conv weights into a CNWF file the classifier
 * binds directly: 26 entries (13 kernels + 13 biases), all frozen, kernels
 * transposed from the source's [kh, kw, in, out] layout to
 * [filters, channels, kh, kw]. A sidecar text file lists per-tensor
 * SHA-256 checksums for spot verification after transfer.
 */

import { createHash } from "node:crypto";
import { writeFileSync } from "node:fs";
import { endianness } from "node:os";

import { CnwfEntry, cnwfByteSize, writeCnwf } from "./cnwf.js";
import { SourceTensor, readTfjsWeights } from "./tfjs.js";
import { KERNEL_SIZE, VGG16_CONV_LAYERS } from "./vgg16.js";

export class ExportError extends Error {}

export interface MappingRow {
  /** Tensor name in the source model. */
  source: string;
  /** CNWF entry name: "<archIndex>.kernels" or "<archIndex>.bias". */
  target: string;
  /** Expected shape on the CNWF side. */
  shape: number[];
  kind: "kernels" | "bias";
}

export interface ExportManifest {
  /** Human-readable identifier of the source model. */
  sourceModel: string;
  /** Path to the source model.json. */
  modelPath: string;
  /** Destination CNWF path; the sidecar is written next to it. */
  outPath: string;
  mapping: MappingRow[];
}

export interface ExportSummary {
  entries: number;
  parameters: number;
  bytes: number;
  outPath: string;
  sumsPath: string;
}

/** The total source-name -> CNWF-name mapping for the 13 conv layers. */
export function vgg16Mapping(): MappingRow[] {
  const rows: MappingRow[] = [];
  for (const l of VGG16_CONV_LAYERS) {
    rows.push({
      source: `${l.name}/kernel`,
      target: `${l.archIndex}.kernels`,
      shape: [l.filters, l.inChannels, KERNEL_SIZE, KERNEL_SIZE],
      kind: "kernels",
    });
    rows.push({
      source: `${l.name}/bias`,
      target: `${l.archIndex}.bias`,
      shape: [l.filters],
      kind: "bias",
    });
  }
  return rows;
}

export function buildVgg16Manifest(modelPath: string, outPath: string): ExportManifest {
  return { sourceModel: "vgg16-imagenet", modelPath, outPath, mapping: vgg16Mapping() };
}

/** [kh, kw, in, out] -> [out, in, kh, kw]. */
export function transposeKernelToFchw(src: Float32Array, shape: number[]): Float32Array {
  const [kh, kw, c, f] = shape as [number, number, number, number];
  const out = new Float32Array(src.length);
  let dst = 0;
  for (let fi = 0; fi < f; fi++) {
    for (let ci = 0; ci < c; ci++) {
      for (let y = 0; y < kh; y++) {
        for (let x = 0; x < kw; x++) {
          out[dst++] = src[((y * kw + x) * c + ci) * f + fi]!;
        }
      }
    }
  }
  return out;
}

function shapesEqual(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

function sourceKernelShape(row: MappingRow): number[] {
  const [f, c, kh, kw] = row.shape as [number, number, number, number];
  return [kh, kw, c, f];
}

function convertRow(row: MappingRow, tensor: SourceTensor): CnwfEntry {
  if (row.kind === "kernels") {
    const expected = sourceKernelShape(row);
    if (!shapesEqual(tensor.shape, expected)) {
      throw new ExportError(
        `shape mismatch for "${row.source}": got [${tensor.shape.join(", ")}], ` +
          `expected [${expected.join(", ")}]`,
      );
    }
    return {
      name: row.target,
      frozen: true,
      shape: row.shape,
      data: transposeKernelToFchw(tensor.data, tensor.shape),
    };
  }
  if (!shapesEqual(tensor.shape, row.shape)) {
    throw new ExportError(
      `shape mismatch for "${row.source}": got [${tensor.shape.join(", ")}], ` +
        `expected [${row.shape.join(", ")}]`,
    );
  }
  return { name: row.target, frozen: true, shape: row.shape, data: tensor.data };
}

function sha256LeFloats(data: Float32Array): string {
  let bytes: Buffer;
  if (endianness() === "LE") {
    bytes = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  } else {
    bytes = Buffer.alloc(data.length * 4);
    for (let i = 0; i < data.length; i++) bytes.writeFloatLE(data[i]!, i * 4);
  }
  return createHash("sha256").update(bytes).digest("hex");
}

export function sidecarText(sourceModel: string, entries: CnwfEntry[]): string {
  const lines = [
    `# per-tensor SHA-256 over little-endian float32 payloads`,
    `# source: ${sourceModel}`,
    `# kernel layout: [filters, channels, kh, kw]; channel order: RGB`,
  ];
  for (const e of entries) {
    lines.push(`${e.name} ${sha256LeFloats(e.data)} ${e.shape.join("x")}`);
  }
  return lines.join("\n") + "\n";
}

export function exportWeights(manifest: ExportManifest): ExportSummary {
  const tensors = readTfjsWeights(manifest.modelPath);
  const entries: CnwfEntry[] = [];
  for (const row of manifest.mapping) {
    const tensor = tensors.get(row.source);
    if (tensor === undefined) {
      throw new ExportError(`missing source layer "${row.source}"`);
    }
    entries.push(convertRow(row, tensor));
  }
  writeCnwf(manifest.outPath, entries);
  const sumsPath = `${manifest.outPath}.sums.txt`;
  writeFileSync(sumsPath, sidecarText(manifest.sourceModel, entries), "utf-8");
  return {
    entries: entries.length,
    parameters: entries.reduce((a, e) => a + e.data.length, 0),
    bytes: cnwfByteSize(entries),
    outPath: manifest.outPath,
    sumsPath,
  };
}
