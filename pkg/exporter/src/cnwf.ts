/**
 * CNWF v1 container: named, shape-tagged, frozen-flagged float32 tensors.
 *
 * Layout, all integers little-endian:
 *
 *     magic "CNWF" | u32 version=1 | u32 entry_count
 *     per entry: u16 name_len | name UTF-8 | u8 frozen | u8 rank
 *                | rank x u32 dims | dims-product x f32 (LE)
 *     trailer: u32 CRC-32 over all preceding bytes
 */

import { crc32 } from "node:zlib";
import { endianness } from "node:os";
import { writeFileSync, readFileSync } from "node:fs";

export const MAGIC = "CNWF";
export const VERSION = 1;

export interface CnwfEntry {
  name: string;
  frozen: boolean;
  shape: number[];
  data: Float32Array;
}

export class CnwfFormatError extends Error {}

function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

/** Exact file size in bytes for a given entry list. */
export function cnwfByteSize(entries: CnwfEntry[]): number {
  let size = 4 + 4 + 4; // magic, version, count
  for (const e of entries) {
    const nameBytes = Buffer.byteLength(e.name, "utf-8");
    size += 2 + nameBytes + 1 + 1 + 4 * e.shape.length + 4 * elementCount(e.shape);
  }
  return size + 4; // CRC-32 trailer
}

function floatPayload(data: Float32Array): Buffer {
  if (endianness() === "LE") {
    return Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  }
  const buf = Buffer.alloc(data.length * 4);
  for (let i = 0; i < data.length; i++) buf.writeFloatLE(data[i]!, i * 4);
  return buf;
}

export function encodeCnwf(entries: CnwfEntry[]): Buffer {
  const seen = new Set<string>();
  const buf = Buffer.alloc(cnwfByteSize(entries));
  let off = buf.write(MAGIC, 0, "ascii");
  off = buf.writeUInt32LE(VERSION, off);
  off = buf.writeUInt32LE(entries.length, off);
  for (const e of entries) {
    if (seen.has(e.name)) throw new CnwfFormatError(`duplicate entry name "${e.name}"`);
    seen.add(e.name);
    if (e.data.length !== elementCount(e.shape)) {
      throw new CnwfFormatError(
        `entry "${e.name}": ${e.data.length} values for shape [${e.shape.join(", ")}]`,
      );
    }
    const nameBytes = Buffer.byteLength(e.name, "utf-8");
    off = buf.writeUInt16LE(nameBytes, off);
    off += buf.write(e.name, off, "utf-8");
    off = buf.writeUInt8(e.frozen ? 1 : 0, off);
    off = buf.writeUInt8(e.shape.length, off);
    for (const dim of e.shape) off = buf.writeUInt32LE(dim, off);
    off += floatPayload(e.data).copy(buf, off);
  }
  buf.writeUInt32LE(crc32(buf.subarray(0, off)) >>> 0, off);
  return buf;
}

export function writeCnwf(path: string, entries: CnwfEntry[]): Buffer {
  const buf = encodeCnwf(entries);
  writeFileSync(path, buf);
  return buf;
}

/** Parse and CRC-verify a CNWF buffer (the complement of encodeCnwf, for tests). */
export function decodeCnwf(buf: Buffer): CnwfEntry[] {
  if (buf.length < 16) throw new CnwfFormatError("truncated file");
  const body = buf.subarray(0, buf.length - 4);
  const stored = buf.readUInt32LE(buf.length - 4);
  if ((crc32(body) >>> 0) !== stored) throw new CnwfFormatError("checksum mismatch");
  if (body.toString("ascii", 0, 4) !== MAGIC) throw new CnwfFormatError("bad magic");
  const version = body.readUInt32LE(4);
  if (version !== VERSION) throw new CnwfFormatError(`unsupported version ${version}`);
  const count = body.readUInt32LE(8);
  let off = 12;
  const entries: CnwfEntry[] = [];
  for (let i = 0; i < count; i++) {
    const nameLen = body.readUInt16LE(off);
    off += 2;
    const name = body.toString("utf-8", off, off + nameLen);
    off += nameLen;
    const frozen = body.readUInt8(off) !== 0;
    const rank = body.readUInt8(off + 1);
    off += 2;
    const shape: number[] = [];
    for (let d = 0; d < rank; d++) {
      shape.push(body.readUInt32LE(off));
      off += 4;
    }
    const n = elementCount(shape);
    const data = new Float32Array(n);
    for (let j = 0; j < n; j++) data[j] = body.readFloatLE(off + j * 4);
    off += n * 4;
    entries.push({ name, frozen, shape, data });
  }
  if (off !== body.length) {
    throw new CnwfFormatError(`${body.length - off} trailing bytes after last entry`);
  }
  return entries;
}

export function readCnwf(path: string): CnwfEntry[] {
  return decodeCnwf(readFileSync(path));
}
