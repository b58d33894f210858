"""Portable dense-embedding file format (EMB1) and the provider contract.

EMB1 layout: magic bytes ``EMB1`` (0x45 0x4D 0x42 0x31), u32 little-endian
row count, u32 little-endian dimension, then ``rows * dim`` float32
little-endian values in row-major order.  Row ids live in a sibling text
file ``<name>.ids.txt`` (one id per line, line i <-> row i), so the format
parses with zero dependencies in any language.
"""
from __future__ import annotations

import json
import logging
import shlex
import struct
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .errors import EmbeddingFormatError, ParameterError, ProviderError

log = logging.getLogger(__name__)

MAGIC = b"EMB1"
HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense float32 matrix with one id per row."""

    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.ndim != 2:
            raise EmbeddingFormatError("embedding values must be a 2-D matrix")
        object.__setattr__(self, "values", vals)
        if vals.shape[1] <= 0:
            raise EmbeddingFormatError("embedding dimension must be positive")
        if len(self.ids) != vals.shape[0]:
            raise EmbeddingFormatError(
                f"{len(self.ids)} ids for {vals.shape[0]} rows"
            )
        if vals.size and not np.all(np.isfinite(vals)):
            raise EmbeddingFormatError("embedding matrix contains NaN/Inf")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ProviderSpec:
    """How to invoke an external encoder process."""

    command: str
    model_name: str
    batch_size: int = 32

    def __post_init__(self):
        if not self.model_name:
            raise ParameterError("provider model_name must be non-empty")


def ids_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".ids.txt")


def write_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(matrix.values, dtype="<f4").tobytes()
    with path.open("wb") as fh:
        fh.write(HEADER.pack(MAGIC, matrix.n_rows, matrix.dim))
        fh.write(payload)
    with ids_path(path).open("w", encoding="utf-8") as fh:
        for i in matrix.ids:
            fh.write(i + "\n")


def read_embeddings(path: str | Path) -> EmbeddingMatrix:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise EmbeddingFormatError(f"{path}: shorter than the 12-byte header")
    magic, n_rows, dim = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}")
    if dim == 0:
        raise EmbeddingFormatError(f"{path}: zero dimension")
    expected = HEADER.size + 4 * n_rows * dim
    if len(raw) != expected:
        raise EmbeddingFormatError(
            f"{path}: payload is {len(raw) - HEADER.size} bytes, "
            f"header promises {expected - HEADER.size}"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=HEADER.size).reshape(n_rows, dim)
    idp = ids_path(path)
    if not idp.exists():
        raise EmbeddingFormatError(f"missing ids file {idp}")
    ids = tuple(line for line in idp.read_text(encoding="utf-8").splitlines())
    if len(ids) != n_rows:
        raise EmbeddingFormatError(f"{idp}: {len(ids)} ids for {n_rows} rows")
    return EmbeddingMatrix(ids=ids, values=values.copy())


def fetch_embeddings(corpus: Corpus, provider: ProviderSpec) -> EmbeddingMatrix:
    """Run a provider process over a corpus and return aligned embeddings.

    The provider reads JSONL ``{"id","text"}`` records on stdin and writes
    EMB1 + ids files at the paths passed via ``--out``/``--ids-out``.
    """
    payload = "".join(
        json.dumps({"id": d.id, "text": d.text}, ensure_ascii=False) + "\n"
        for d in corpus
    )
    with tempfile.TemporaryDirectory(prefix="topiclab-emb-") as tmp:
        out = Path(tmp) / "embeddings.emb1"
        argv = shlex.split(provider.command) + [
            "--model", provider.model_name,
            "--out", str(out),
            "--ids-out", str(ids_path(out)),
            "--batch-size", str(provider.batch_size),
        ]
        proc = subprocess.run(
            argv, input=payload.encode("utf-8"),
            stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        )
        if proc.returncode != 0:
            raise ProviderError(
                f"provider exited {proc.returncode}: "
                f"{proc.stderr.decode('utf-8', 'replace')[-2000:]}"
            )
        try:
            matrix = read_embeddings(out)
        except EmbeddingFormatError as exc:
            raise ProviderError(f"provider wrote malformed output: {exc}") from exc
    if list(matrix.ids) != corpus.ids:
        raise ProviderError(
            f"provider returned {matrix.n_rows} rows that do not align with "
            f"the {len(corpus)} corpus documents"
        )
    return matrix


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cos(u, v); in [0, 2].  Zero vectors are rejected."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ParameterError(f"shape mismatch {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ParameterError("cosine distance undefined for zero vectors")
    return float(np.clip(1.0 - float(u @ v) / (nu * nv), 0.0, 2.0))
