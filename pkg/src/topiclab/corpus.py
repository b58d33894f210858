"""Corpus loading, split filtering, text normalization and tokenization."""
from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import ConfigurationError, EmptySplitError

log = logging.getLogger(__name__)

LABELS = ("fake", "real", "other")

# Emoji coverage is a fixed list of Unicode blocks, chosen for reproducibility:
# Emoticons, Misc Symbols & Pictographs, Supplemental Symbols & Pictographs,
# Transport & Map, and regional-indicator flags.
_EMOJI_RE = re.compile(
    "["
    "\U0001F600-\U0001F64F"
    "\U0001F300-\U0001F5FF"
    "\U0001F900-\U0001F9FF"
    "\U0001F680-\U0001F6FF"
    "\U0001F1E6-\U0001F1FF"
    "]+"
)
_COVID_RE = re.compile(r"covid[-\s]?19", re.IGNORECASE)
_WS_RE = re.compile(r"\s+")
_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    country: str = ""
    language: str = ""
    label: str = "other"
    published: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ConfigurationError("document id must be non-empty")
        if not self.text.strip():
            raise ConfigurationError(f"document {self.id!r} has empty text")
        if self.label not in LABELS:
            raise ConfigurationError(f"label must be one of {LABELS}, got {self.label!r}")


@dataclass(frozen=True)
class Corpus:
    """Immutable, ordered document collection.

    Document order is load order and defines the row order of every matrix
    derived from this corpus downstream.
    """

    documents: tuple[Document, ...]
    provenance: str = ""
    skipped_rows: int = 0

    def __post_init__(self):
        ids = [d.id for d in self.documents]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ConfigurationError(f"duplicate document ids: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.documents]


@dataclass(frozen=True)
class TokenizedDocument:
    id: str
    tokens: tuple[str, ...]


DEFAULT_FIELD_MAP = {
    "id": "id",
    "text": "text",
    "country": "country",
    "language": "language",
    "label": "label",
    "published": "published",
}

_LABEL_ALIASES = {"fake": "fake", "false": "fake", "real": "real", "true": "real"}


def _normalize_label(raw: str | None) -> str:
    if raw is None:
        return "other"
    return _LABEL_ALIASES.get(raw.strip().lower(), "other")


def _row_to_document(row: dict, field_map: dict, row_id: str) -> Document:
    def get(key):
        col = field_map.get(key)
        if col is None:
            return None
        return row.get(col)

    return Document(
        id=str(get("id") or row_id),
        text=str(get("text")),
        country=str(get("country") or ""),
        language=str(get("language") or ""),
        label=_normalize_label(get("label")),
        published=(str(get("published")) if get("published") else None),
    )


def load_corpus(path: str | Path, format: str, field_map: dict | None = None) -> Corpus:
    """Read a CSV or JSONL file into a Corpus.

    Rows with empty text are skipped and counted; malformed rows are logged
    with their line number and the run continues.  A mapped column that is
    missing from the file entirely is a configuration error.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"corpus file not found: {path}")
    fmap = dict(DEFAULT_FIELD_MAP)
    if field_map:
        fmap.update({k: v for k, v in field_map.items() if v})
    if format not in ("csv", "jsonl"):
        raise ConfigurationError(f"unknown corpus format {format!r}")

    docs: list[Document] = []
    skipped = 0
    if format == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            text_col = fmap["text"]
            if text_col not in header:
                raise ConfigurationError(f"text column {text_col!r} not in header {header}")
            for key in ("id", "country", "language", "label", "published"):
                col = fmap.get(key)
                if col is not None and col not in header and key in (field_map or {}):
                    raise ConfigurationError(f"mapped column {col!r} for {key!r} not in header")
            for lineno, row in enumerate(reader, start=2):
                doc, skip = _parse_row(row, fmap, lineno)
                if doc is not None:
                    docs.append(doc)
                skipped += skip
    else:
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    log.warning("line %d: malformed JSON (%s); skipping", lineno, exc)
                    skipped += 1
                    continue
                doc, skip = _parse_row(row, fmap, lineno)
                if doc is not None:
                    docs.append(doc)
                skipped += skip

    if not docs:
        log.warning("corpus %s yielded 0 documents", path)
    return Corpus(tuple(docs), provenance=f"{path} [{format}]", skipped_rows=skipped)


def _parse_row(row: dict, fmap: dict, lineno: int) -> tuple[Document | None, int]:
    text = row.get(fmap["text"])
    if text is None or not str(text).strip():
        log.warning("line %d: empty text; skipping", lineno)
        return None, 1
    try:
        return _row_to_document(row, fmap, row_id=f"row{lineno:06d}"), 0
    except (ConfigurationError, TypeError, ValueError) as exc:
        log.warning("line %d: malformed row (%s); skipping", lineno, exc)
        return None, 1


def filter_split(corpus: Corpus, country: str, language: str, label: str) -> Corpus:
    """Keep documents matching all three predicates, preserving order."""
    kept = tuple(
        d
        for d in corpus.documents
        if d.country == country and d.language == language and d.label == label
    )
    if not kept:
        raise EmptySplitError(
            f"no documents with country={country!r} language={language!r} label={label!r}"
        )
    desc = f"{corpus.provenance} | split(country={country}, language={language}, label={label})"
    return Corpus(kept, provenance=desc, skipped_rows=corpus.skipped_rows)


def preprocess(text: str) -> str:
    """Normalize a raw article: strip emoji, canonicalize covid19, tidy spaces.

    Idempotent; lowercasing is deferred to tokenization.
    """
    text = _EMOJI_RE.sub(" ", text)
    text = _COVID_RE.sub("covid19", text)
    return _WS_RE.sub(" ", text).strip()


def preprocess_corpus(corpus: Corpus) -> Corpus:
    docs = tuple(replace(d, text=preprocess(d.text)) for d in corpus.documents)
    return Corpus(docs, provenance=f"{corpus.provenance} | preprocessed", skipped_rows=corpus.skipped_rows)


def load_stopwords(language: str, path: str | Path | None = None) -> frozenset[str]:
    """Load one stopword list; bundled lists live at data/stopwords/<lang>.txt."""
    if path is not None:
        raw = Path(path).read_text(encoding="utf-8")
    else:
        ref = resources.files("topiclab").joinpath(f"data/stopwords/{language}.txt")
        if not ref.is_file():
            raise ConfigurationError(f"no bundled stopword list for language {language!r}")
        raw = ref.read_text(encoding="utf-8")
    return frozenset(w.strip() for w in raw.splitlines() if w.strip())


def bundled_stopwords() -> dict[str, frozenset[str]]:
    return {lang: load_stopwords(lang) for lang in ("en", "de")}


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN_RE.findall(text)]


def tokenize_and_filter(
    doc: Document, stopwords: dict[str, frozenset[str]] | None = None
) -> TokenizedDocument:
    """Lowercase word-boundary tokens minus the language's stopwords.

    Numeric tokens are kept.  Unknown languages proceed with an empty
    stopword set (warned once per call site via logging).
    """
    stopwords = stopwords if stopwords is not None else bundled_stopwords()
    stops = stopwords.get(doc.language)
    if stops is None:
        log.warning("no stopword list for language %r; keeping all tokens", doc.language)
        stops = frozenset()
    tokens = tuple(t for t in tokenize(doc.text) if t not in stops)
    if not tokens:
        log.warning("document %s is empty after stopword removal", doc.id)
    return TokenizedDocument(id=doc.id, tokens=tokens)


def tokenize_corpus(
    corpus: Corpus | Iterable[Document], stopwords: dict[str, frozenset[str]] | None = None
) -> list[TokenizedDocument]:
    stopwords = stopwords if stopwords is not None else bundled_stopwords()
    return [tokenize_and_filter(d, stopwords) for d in corpus]
