"""Deterministic bag-of-hashed-words embedding provider.

Implements the provider contract (JSONL {"id","text"} on stdin, EMB1 +
ids files out) without any model runtime: every token gets a fixed
pseudo-random unit direction derived from sha256(model, token), and a
document embeds as the normalized sum of its token vectors.  Documents
sharing vocabulary therefore land close under cosine, which is exactly
what the pipeline tests and demos need.

Run as ``python -m topiclab.mock_provider --model hash-64 ...``.  The
model names ``[para]`` and ``[cross]`` map to 768 dimensions; ``hash-<d>``
selects an explicit dimension.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys

import numpy as np

from .embedding_io import EmbeddingMatrix, write_embeddings
from .errors import ProviderError
from .rng import uniform_array

_MODEL_DIMS = {"[para]": 768, "[cross]": 768}
_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def model_dim(model_name: str) -> int:
    if model_name in _MODEL_DIMS:
        return _MODEL_DIMS[model_name]
    m = re.fullmatch(r"hash-(\d+)", model_name)
    if m:
        return int(m.group(1))
    return 64


def _token_vector(model_name: str, token: str, dim: int) -> np.ndarray:
    digest = hashlib.sha256(f"{model_name}\x1f{token}".encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    vec = uniform_array(seed, dim, lo=-1.0, hi=1.0)
    return vec / np.linalg.norm(vec)


class HashEmbedder:
    """Caches token directions so corpora embed in vectorized time."""

    def __init__(self, model_name: str, dim: int | None = None):
        self.model_name = model_name
        self.dim = dim or model_dim(model_name)
        self._cache: dict[str, np.ndarray] = {}

    def embed_text(self, text: str) -> np.ndarray:
        tokens = [t.lower() for t in _TOKEN_RE.findall(text)] or ["\x00empty"]
        total = np.zeros(self.dim)
        for tok in tokens:
            vec = self._cache.get(tok)
            if vec is None:
                vec = _token_vector(self.model_name, tok, self.dim)
                self._cache[tok] = vec
            total += vec
        norm = np.linalg.norm(total)
        if norm == 0.0:  # opposing token vectors; fall back to first token
            total = self._cache[tokens[0]]
            norm = np.linalg.norm(total)
        return total / norm

    def embed(self, texts: list[str]) -> np.ndarray:
        return np.asarray([self.embed_text(t) for t in texts], dtype=np.float32)


def encode_stream(lines, model_name: str) -> tuple[list[str], np.ndarray]:
    embedder = HashEmbedder(model_name)
    ids: list[str] = []
    texts: list[str] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            ids.append(str(rec["id"]))
            texts.append(str(rec["text"]))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ProviderError(f"stdin line {lineno}: bad record ({exc})")
    if texts:
        values = embedder.embed(texts)
    else:
        values = np.zeros((0, embedder.dim), dtype=np.float32)
    return ids, values


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", required=True)
    parser.add_argument("--input", default=None, help="JSONL file; default stdin")
    parser.add_argument("--out", required=True)
    parser.add_argument("--ids-out", default=None)
    parser.add_argument("--batch-size", type=int, default=32)  # accepted, unused
    args = parser.parse_args(argv)

    if args.input:
        with open(args.input, encoding="utf-8") as fh:
            ids, values = encode_stream(fh, args.model)
    else:
        ids, values = encode_stream(sys.stdin, args.model)
    matrix = EmbeddingMatrix(ids=tuple(ids), values=values)
    write_embeddings(matrix, args.out)
    if args.ids_out:
        from .embedding_io import ids_path

        default = ids_path(args.out)
        if str(default) != str(args.ids_out):
            with open(args.ids_out, "w", encoding="utf-8") as fh:
                for i in ids:
                    fh.write(i + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
