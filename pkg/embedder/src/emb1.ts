/**
 * EMB1 binary format: magic "EMB1", u32 LE row count, u32 LE dimension,
 * then rows*dim float32 LE values in row-major order. Row ids live in a
 * sibling text file, one id per line, line i <-> row i.
 */
import { writeFileSync, readFileSync } from "node:fs";

export const MAGIC = Buffer.from("EMB1", "ascii");
export const HEADER_BYTES = 12;

export interface EmbeddingMatrix {
  ids: string[];
  dim: number;
  /** row-major, ids.length * dim values */
  values: Float32Array;
}

export function encodeEmb1(matrix: EmbeddingMatrix): Buffer {
  const { ids, dim, values } = matrix;
  if (values.length !== ids.length * dim) {
    throw new Error(`values length ${values.length} != ${ids.length} rows * ${dim}`);
  }
  const header = Buffer.alloc(HEADER_BYTES);
  MAGIC.copy(header, 0);
  header.writeUInt32LE(ids.length, 4);
  header.writeUInt32LE(dim, 8);
  const payload = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) {
    payload.writeFloatLE(values[i], i * 4);
  }
  return Buffer.concat([header, payload]);
}

export function writeEmb1(matrix: EmbeddingMatrix, outPath: string, idsPath: string): void {
  writeFileSync(outPath, encodeEmb1(matrix));
  writeFileSync(idsPath, matrix.ids.map((i) => i + "\n").join(""), "utf-8");
}

export function readEmb1(outPath: string, idsPath: string): EmbeddingMatrix {
  const raw = readFileSync(outPath);
  if (raw.length < HEADER_BYTES || !raw.subarray(0, 4).equals(MAGIC)) {
    throw new Error(`${outPath}: not an EMB1 file`);
  }
  const rows = raw.readUInt32LE(4);
  const dim = raw.readUInt32LE(8);
  if (raw.length !== HEADER_BYTES + rows * dim * 4) {
    throw new Error(`${outPath}: truncated payload`);
  }
  const values = new Float32Array(rows * dim);
  for (let i = 0; i < values.length; i++) {
    values[i] = raw.readFloatLE(HEADER_BYTES + i * 4);
  }
  const text = readFileSync(idsPath, "utf-8");
  const ids = text.length === 0 ? [] : text.replace(/\n$/, "").split("\n");
  if (rows === 0 && text.length === 0) {
    return { ids: [], dim, values };
  }
  if (ids.length !== rows) {
    throw new Error(`${idsPath}: ${ids.length} ids for ${rows} rows`);
  }
  return { ids, dim, values };
}
