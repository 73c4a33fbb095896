import { mkdtempSync, readFileSync, statSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { readCnwf } from "../src/cnwf.js";
import {
  ExportError,
  ExportManifest,
  buildVgg16Manifest,
  exportWeights,
  sidecarText,
  transposeKernelToFchw,
  vgg16Mapping,
} from "../src/export.js";
import { backboneParameterCount, VGG16_CONV_LAYERS } from "../src/vgg16.js";

function tmp(): string {
  return mkdtempSync(join(tmpdir(), "export-"));
}

function floatsLE(values: number[]): Buffer {
  const buf = Buffer.alloc(values.length * 4);
  values.forEach((v, i) => buf.writeFloatLE(v, i * 4));
  return buf;
}

/** A source model with one 1-in/2-out conv layer named like the real thing. */
function smallSource(dir: string, opts: { omitBias?: boolean; badShape?: boolean } = {}) {
  // Kernel in [kh, kw, in, out] = [3, 3, 1, 2]: interleaved filter values.
  const kernel: number[] = [];
  for (let pos = 0; pos < 9; pos++) kernel.push(pos + 100, pos + 200);
  const weights = [
    { name: "block1_conv1/kernel", shape: opts.badShape ? [3, 3, 2, 1] : [3, 3, 1, 2], dtype: "float32" },
    ...(opts.omitBias ? [] : [{ name: "block1_conv1/bias", shape: [2], dtype: "float32" }]),
  ];
  const payload = floatsLE([...kernel, ...(opts.omitBias ? [] : [0.5, -0.5])]);
  writeFileSync(join(dir, "shard1.bin"), payload);
  const modelJson = join(dir, "model.json");
  writeFileSync(
    modelJson,
    JSON.stringify({ weightsManifest: [{ paths: ["shard1.bin"], weights }] }),
  );
  const manifest: ExportManifest = {
    sourceModel: "unit-test",
    modelPath: modelJson,
    outPath: join(dir, "out.cnwf"),
    mapping: [
      { source: "block1_conv1/kernel", target: "0.kernels", shape: [2, 1, 3, 3], kind: "kernels" },
      { source: "block1_conv1/bias", target: "0.bias", shape: [2], kind: "bias" },
    ],
  };
  return manifest;
}

describe("vgg16Mapping", () => {
  it("covers exactly the 13 conv layers, 26 tensors, in arch order", () => {
    const rows = vgg16Mapping();
    expect(rows).toHaveLength(26);
    expect(rows.map((r) => r.target)).toEqual(
      VGG16_CONV_LAYERS.flatMap((l) => [`${l.archIndex}.kernels`, `${l.archIndex}.bias`]),
    );
    expect(new Set(rows.map((r) => r.source)).size).toBe(26);
    expect(rows.every((r) => !r.target.includes("weights"))).toBe(true); // no head tensors
  });

  it("first conv kernel shape is [64, 3, 3, 3]", () => {
    expect(vgg16Mapping()[0]!.shape).toEqual([64, 3, 3, 3]);
  });

  it("parameter total matches the published backbone size", () => {
    const total = vgg16Mapping().reduce((a, r) => a + r.shape.reduce((x, y) => x * y, 1), 0);
    expect(total).toBe(backboneParameterCount());
    expect(total).toBe(14_714_688);
  });
});

describe("transposeKernelToFchw", () => {
  it("moves [kh, kw, in, out] to [out, in, kh, kw] exactly", () => {
    // src[y][x][c][f] = 1000*y + 100*x + 10*c + f for unambiguous tracking.
    const [kh, kw, c, f] = [2, 2, 3, 2];
    const src = new Float32Array(kh * kw * c * f);
    let i = 0;
    for (let y = 0; y < kh; y++)
      for (let x = 0; x < kw; x++)
        for (let ci = 0; ci < c; ci++)
          for (let fi = 0; fi < f; fi++) src[i++] = 1000 * y + 100 * x + 10 * ci + fi;
    const out = transposeKernelToFchw(src, [kh, kw, c, f]);
    let j = 0;
    for (let fi = 0; fi < f; fi++)
      for (let ci = 0; ci < c; ci++)
        for (let y = 0; y < kh; y++)
          for (let x = 0; x < kw; x++) {
            expect(out[j++]).toBe(1000 * y + 100 * x + 10 * ci + fi);
          }
  });
});

describe("exportWeights", () => {
  it("writes frozen entries with transposed kernels and a sidecar", () => {
    const manifest = smallSource(tmp());
    const summary = exportWeights(manifest);
    expect(summary.entries).toBe(2);
    expect(summary.parameters).toBe(20);
    expect(statSync(manifest.outPath).size).toBe(summary.bytes);

    const entries = readCnwf(manifest.outPath);
    expect(entries.map((e) => e.name)).toEqual(["0.kernels", "0.bias"]);
    expect(entries.every((e) => e.frozen)).toBe(true);
    expect(entries[0]!.shape).toEqual([2, 1, 3, 3]);
    // Filter 0 was the +100 stream, filter 1 the +200 stream.
    expect([...entries[0]!.data.slice(0, 9)]).toEqual(
      [100, 101, 102, 103, 104, 105, 106, 107, 108],
    );
    expect([...entries[0]!.data.slice(9)]).toEqual(
      [200, 201, 202, 203, 204, 205, 206, 207, 208],
    );

    const sums = readFileSync(summary.sumsPath, "utf-8").trim().split("\n");
    expect(sums.filter((l) => !l.startsWith("#"))).toHaveLength(2);
    expect(sums.some((l) => l.includes("channel order"))).toBe(true);
    const kernelRow = sums.find((l) => l.startsWith("0.kernels "))!;
    expect(kernelRow).toMatch(/^0\.kernels [0-9a-f]{64} 2x1x3x3$/);
  });

  it("sidecar checksums change when values change", () => {
    const a = sidecarText("m", [
      { name: "0.bias", frozen: true, shape: [1], data: new Float32Array([1]) },
    ]);
    const b = sidecarText("m", [
      { name: "0.bias", frozen: true, shape: [1], data: new Float32Array([2]) },
    ]);
    expect(a).not.toEqual(b);
  });

  it("names the missing source layer", () => {
    const manifest = smallSource(tmp(), { omitBias: true });
    expect(() => exportWeights(manifest)).toThrow(
      /missing source layer "block1_conv1\/bias"/,
    );
  });

  it("rejects a source kernel of the wrong shape", () => {
    const manifest = smallSource(tmp(), { badShape: true });
    expect(() => exportWeights(manifest)).toThrow(ExportError);
    expect(() => exportWeights(manifest)).toThrow(/shape mismatch for "block1_conv1\/kernel"/);
  });
});

describe("buildVgg16Manifest", () => {
  it("wires paths and the full mapping", () => {
    const manifest = buildVgg16Manifest("/m/model.json", "/o/backbone.cnwf");
    expect(manifest.modelPath).toBe("/m/model.json");
    expect(manifest.outPath).toBe("/o/backbone.cnwf");
    expect(manifest.mapping).toHaveLength(26);
  });
});
