/**
 * Deterministic offline encoder: every token owns a fixed pseudo-random
 * unit direction derived from sha256(model, token) through a splitmix64
 * stream, and a text embeds as the normalized sum of its token vectors.
 *
 * The construction matches the reference mock provider on the Python side
 * value for value (same hashing, same stream, same [-1,1) mapping), so the
 * two implementations produce interchangeable embeddings.
 */
import { createHash } from "node:crypto";

const MASK = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;

export const MODEL_DIMS: Record<string, number> = {
  "[para]": 768,
  "[cross]": 768,
};

export function modelDim(modelName: string): number {
  if (modelName in MODEL_DIMS) return MODEL_DIMS[modelName];
  const m = /^hash-(\d+)$/.exec(modelName);
  if (m) return parseInt(m[1], 10);
  return 64;
}

function splitmix64(x: bigint): bigint {
  let z = (x + GOLDEN) & MASK;
  z = ((z ^ (z >> 30n)) * MIX1) & MASK;
  z = ((z ^ (z >> 27n)) * MIX2) & MASK;
  return z ^ (z >> 31n);
}

export function uniformArray(seed: bigint, n: number, lo: number, hi: number): Float64Array {
  const base = (seed * GOLDEN) & MASK;
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    const bits = splitmix64((BigInt(i) + base) & MASK);
    out[i] = lo + (hi - lo) * Number(bits >> 11n) * 2 ** -53;
  }
  return out;
}

const TOKEN_RE = /[\p{L}\p{N}_]+/gu;

export function tokenize(text: string): string[] {
  const tokens = text.toLowerCase().match(TOKEN_RE);
  return tokens ? Array.from(tokens) : [];
}

function norm(v: Float64Array): number {
  let total = 0;
  for (let i = 0; i < v.length; i++) total += v[i] * v[i];
  return Math.sqrt(total);
}

export class HashEmbedder {
  readonly modelName: string;
  readonly dim: number;
  private cache = new Map<string, Float64Array>();

  constructor(modelName: string, dim?: number) {
    this.modelName = modelName;
    this.dim = dim ?? modelDim(modelName);
  }

  private tokenVector(token: string): Float64Array {
    let vec = this.cache.get(token);
    if (vec === undefined) {
      const digest = createHash("sha256")
        .update(`${this.modelName}\x1f${token}`, "utf-8")
        .digest();
      const seed = digest.readBigUInt64LE(0);
      vec = uniformArray(seed, this.dim, -1, 1);
      const n = norm(vec);
      for (let i = 0; i < vec.length; i++) vec[i] /= n;
      this.cache.set(token, vec);
    }
    return vec;
  }

  embedText(text: string): Float64Array {
    const tokens = tokenize(text);
    if (tokens.length === 0) tokens.push("\x00empty");
    const total = new Float64Array(this.dim);
    for (const token of tokens) {
      const vec = this.tokenVector(token);
      for (let i = 0; i < this.dim; i++) total[i] += vec[i];
    }
    let n = norm(total);
    if (n === 0) {
      const fallback = this.tokenVector(tokens[0]);
      total.set(fallback);
      n = norm(total);
    }
    for (let i = 0; i < this.dim; i++) total[i] /= n;
    return total;
  }

  embed(texts: string[]): Float32Array {
    const out = new Float32Array(texts.length * this.dim);
    texts.forEach((text, row) => {
      out.set(Float32Array.from(this.embedText(text)), row * this.dim);
    });
    return out;
  }
}
