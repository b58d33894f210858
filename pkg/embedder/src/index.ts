export { encodeEmb1, readEmb1, writeEmb1 } from "./emb1.js";
export type { EmbeddingMatrix } from "./emb1.js";
export { HashEmbedder, modelDim, tokenize, uniformArray } from "./hash.js";
export { MODEL_ALIASES, ModelLoadError, loadTransformerBackend } from "./transformer.js";
export { main } from "./cli.js";
