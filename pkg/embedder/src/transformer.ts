/**
 * Real sentence-encoder backend via transformers.js, loaded lazily so the
 * CLI works (with the hash fallback) when the runtime or model weights are
 * unavailable. Model aliases map the short evaluation names onto their
 * published checkpoints.
 */

export const MODEL_ALIASES: Record<string, string> = {
  "[para]": "Xenova/paraphrase-multilingual-mpnet-base-v2",
  "[cross]": "T-Systems-onsite/cross-en-de-roberta-sentence-transformer",
};

export interface TransformerBackend {
  dim: number;
  resolvedModel: string;
  encode(texts: string[], batchSize: number): Promise<Float32Array>;
}

export class ModelLoadError extends Error {}

export async function loadTransformerBackend(modelName: string): Promise<TransformerBackend> {
  const resolved = MODEL_ALIASES[modelName] ?? modelName;
  let pipeline: any;
  try {
    const mod: any = await import("@xenova/transformers");
    pipeline = await mod.pipeline("feature-extraction", resolved, { quantized: true });
  } catch (err) {
    throw new ModelLoadError(
      `cannot load encoder ${resolved}: ${err instanceof Error ? err.message : err}`
    );
  }
  // probe the output width once
  const probe = await pipeline("dimension probe", { pooling: "mean", normalize: true });
  const dim = probe.dims[probe.dims.length - 1];

  return {
    dim,
    resolvedModel: resolved,
    async encode(texts: string[], batchSize: number): Promise<Float32Array> {
      const out = new Float32Array(texts.length * dim);
      for (let start = 0; start < texts.length; start += batchSize) {
        const batch = texts.slice(start, start + batchSize);
        const result = await pipeline(batch, { pooling: "mean", normalize: true });
        const flat: Float32Array = result.data;
        out.set(flat.subarray(0, batch.length * dim), start * dim);
      }
      return out;
    },
  };
}
