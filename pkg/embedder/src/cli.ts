#!/usr/bin/env node
/**
 * Embedding provider CLI.
 *
 * Reads JSONL {"id","text"} records from stdin (or --input), encodes them
 * with the selected backend, and writes an EMB1 matrix plus an ids file.
 * Row order equals input order.
 *
 *   emb1-embedder --model "[para]" --out doc.emb1 --ids-out doc.emb1.ids.txt
 *
 * Backends: "transformers" (real sentence encoder; exit 3 if it cannot
 * load), "hash" (deterministic offline token hashing), or "auto" (try the
 * encoder, fall back to hashing with a warning). A sidecar
 * <out>.meta.json records the backend, resolved model and dimension.
 */
import { writeFileSync } from "node:fs";
import { stdin } from "node:process";
import { readFileSync } from "node:fs";

import { writeEmb1 } from "./emb1.js";
import { HashEmbedder, modelDim } from "./hash.js";
import { ModelLoadError, loadTransformerBackend } from "./transformer.js";

const EXIT_OK = 0;
const EXIT_BAD_INPUT = 1;
const EXIT_USAGE = 2;
const EXIT_MODEL_LOAD = 3;
const EXIT_OOM = 4;

interface Args {
  model: string;
  input?: string;
  out: string;
  idsOut: string;
  batchSize: number;
  backend: "auto" | "transformers" | "hash";
}

function parseArgs(argv: string[]): Args {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new Error(`malformed arguments near ${key}`);
    }
    flags.set(key.slice(2), value);
  }
  const model = flags.get("model");
  const out = flags.get("out");
  if (!model || !out) {
    throw new Error("--model and --out are required");
  }
  const backend = (flags.get("backend") ?? "auto") as Args["backend"];
  if (!["auto", "transformers", "hash"].includes(backend)) {
    throw new Error(`unknown backend ${backend}`);
  }
  return {
    model,
    input: flags.get("input"),
    out,
    idsOut: flags.get("ids-out") ?? out + ".ids.txt",
    batchSize: parseInt(flags.get("batch-size") ?? "32", 10),
    backend,
  };
}

async function readAllStdin(): Promise<string> {
  const chunks: Buffer[] = [];
  for await (const chunk of stdin) {
    chunks.push(chunk as Buffer);
  }
  return Buffer.concat(chunks).toString("utf-8");
}

function parseRecords(raw: string): { ids: string[]; texts: string[] } {
  const ids: string[] = [];
  const texts: string[] = [];
  const lines = raw.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let record: any;
    try {
      record = JSON.parse(line);
    } catch (err) {
      throw new Error(`stdin line ${i + 1}: invalid JSON`);
    }
    if (typeof record.id === "undefined" || typeof record.text === "undefined") {
      throw new Error(`stdin line ${i + 1}: record needs "id" and "text"`);
    }
    ids.push(String(record.id));
    texts.push(String(record.text));
  }
  return { ids, texts };
}

export async function main(argv: string[]): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${err instanceof Error ? err.message : err}`);
    return EXIT_USAGE;
  }

  let raw: string;
  try {
    raw = args.input ? readFileSync(args.input, "utf-8") : await readAllStdin();
  } catch (err) {
    console.error(`cannot read input: ${err instanceof Error ? err.message : err}`);
    return EXIT_BAD_INPUT;
  }

  let ids: string[];
  let texts: string[];
  try {
    ({ ids, texts } = parseRecords(raw));
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return EXIT_BAD_INPUT;
  }

  let backendName = args.backend;
  let dim: number;
  let resolvedModel = args.model;
  let values: Float32Array;
  try {
    if (backendName === "hash") {
      const embedder = new HashEmbedder(args.model);
      dim = embedder.dim;
      values = embedder.embed(texts);
    } else {
      try {
        const backend = await loadTransformerBackend(args.model);
        dim = backend.dim;
        resolvedModel = backend.resolvedModel;
        values = await backend.encode(texts, args.batchSize);
        backendName = "transformers";
      } catch (err) {
        if (!(err instanceof ModelLoadError) || args.backend === "transformers") {
          throw err;
        }
        console.error(`warning: ${err.message}; falling back to the hash backend`);
        backendName = "hash";
        const embedder = new HashEmbedder(args.model);
        dim = embedder.dim;
        values = embedder.embed(texts);
      }
    }
  } catch (err) {
    if (err instanceof ModelLoadError) {
      console.error(String(err.message));
      return EXIT_MODEL_LOAD;
    }
    const message = err instanceof Error ? err.message : String(err);
    if (err instanceof RangeError || /memory/i.test(message)) {
      console.error(
        `out of memory while encoding; retry with a smaller --batch-size ` +
        `(current: ${args.batchSize})`
      );
      return EXIT_OOM;
    }
    console.error(`encoding failed: ${message}`);
    return EXIT_BAD_INPUT;
  }

  writeEmb1({ ids, dim, values }, args.out, args.idsOut);
  writeFileSync(
    args.out + ".meta.json",
    JSON.stringify(
      { backend: backendName, dim, model: args.model, resolved_model: resolvedModel },
      ["backend", "dim", "model", "resolved_model"],
      2
    ) + "\n",
    "utf-8"
  );
  console.error(`${ids.length} x ${dim} embeddings -> ${args.out} [${backendName}]`);
  return EXIT_OK;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("emb1-embedder")) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
