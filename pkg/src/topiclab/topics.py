"""Topic extraction: class-based TF-IDF and embedding-similarity ranking."""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .corpus import Corpus, TokenizedDocument
from .embedding_io import EmbeddingMatrix, ProviderSpec, fetch_embeddings
from .errors import ParameterError, ProviderError
from .hdbscan import Labeling

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassDocument:
    """All tokens of one cluster merged into a single bag of words."""

    cluster_id: int
    token_counts: dict[str, int]
    total_tokens: int

    @staticmethod
    def from_counts(cluster_id: int, counts: Counter) -> "ClassDocument":
        return ClassDocument(cluster_id, dict(counts), sum(counts.values()))


@dataclass(frozen=True)
class TopicModel:
    """Per-cluster ranked (word, weight) lists; -1 holds the outlier topic."""

    topics: dict[int, list[tuple[str, float]]]
    cluster_sizes: dict[int, int]
    method: str

    def topic_ids(self, include_outlier: bool = True) -> list[int]:
        ids = sorted(self.topics)
        return ids if include_outlier else [i for i in ids if i >= 0]


def merge_cluster_docs(
    tokenized: Sequence[TokenizedDocument], labeling: Labeling
) -> list[ClassDocument]:
    """One merged bag-of-words per distinct label, including -1."""
    labels = labeling.labels if isinstance(labeling, Labeling) else np.asarray(labeling)
    if len(tokenized) != len(labels):
        raise ParameterError("token stream and labels are not aligned")
    counts: dict[int, Counter] = {}
    for doc, label in zip(tokenized, labels):
        counts.setdefault(int(label), Counter()).update(doc.tokens)
    return [ClassDocument.from_counts(c, counts[c]) for c in sorted(counts)]


def ctfidf(classes: Sequence[ClassDocument], labeling: Labeling | None = None) -> TopicModel:
    """W(t, c) = tf(t, c) * ln(1 + A / f(t)) with A the mean class length and
    f(t) the word's total frequency across classes.  Ties rank alphabetically.
    """
    if not classes:
        raise ParameterError("ctfidf needs at least one class")
    freq: Counter = Counter()
    for cls in classes:
        freq.update(cls.token_counts)
    if not freq:
        raise ParameterError("empty vocabulary")
    mean_tokens = sum(c.total_tokens for c in classes) / len(classes)
    topics: dict[int, list[tuple[str, float]]] = {}
    for cls in classes:
        scored = [
            (term, tf * math.log1p(mean_tokens / freq[term]))
            for term, tf in cls.token_counts.items()
        ]
        scored.sort(key=lambda tw: (-tw[1], tw[0]))
        topics[cls.cluster_id] = scored
    return TopicModel(topics, _cluster_sizes(labeling, topics), method="ctfidf")


def _cluster_sizes(labeling: Labeling | None, topics: dict) -> dict[int, int]:
    if labeling is None:
        return {c: 0 for c in topics}
    labels = labeling.labels
    return {c: int(np.sum(labels == c)) for c in topics}


WordEmbedder = Callable[[list[str]], np.ndarray]


def _embed_words(words: list[str], provider: ProviderSpec | WordEmbedder) -> np.ndarray:
    if callable(provider):
        return np.asarray(provider(words), dtype=np.float64)
    from .corpus import Document

    docs = tuple(Document(id=f"w{i:05d}", text=w) for i, w in enumerate(words))
    matrix = fetch_embeddings(Corpus(docs, provenance="candidate words"), provider)
    return np.asarray(matrix.values, dtype=np.float64)


def keybert_topics(
    classes: Sequence[ClassDocument],
    embeddings: EmbeddingMatrix,
    labeling: Labeling,
    provider: ProviderSpec | WordEmbedder,
    candidates_per_topic: int = 50,
) -> TopicModel:
    """Rank each cluster's candidate words by cosine similarity between the
    word's embedding and the cluster centroid.  Candidates come from the
    top class-TF-IDF words of the same cluster.
    """
    if embeddings.n_rows != len(labeling.labels):
        raise ParameterError("embeddings and labels are not aligned")
    base = ctfidf(classes, labeling)
    vocab: list[str] = []
    seen = set()
    candidates: dict[int, list[str]] = {}
    for cid in base.topic_ids():
        words = [w for w, _ in base.topics[cid][:candidates_per_topic]]
        candidates[cid] = words
        for w in words:
            if w not in seen:
                seen.add(w)
                vocab.append(w)
    if not vocab:
        log.warning("no candidate words; returning empty topics")
        return TopicModel({c: [] for c in candidates}, base.cluster_sizes, "keybert")
    vectors = _embed_words(vocab, provider)
    if vectors.shape[0] != len(vocab):
        raise ProviderError(f"provider returned {vectors.shape[0]} vectors for {len(vocab)} words")
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        raise ProviderError("provider returned a zero vector for a candidate word")
    unit = vectors / norms[:, None]
    word_row = {w: i for i, w in enumerate(vocab)}

    values = np.asarray(embeddings.values, dtype=np.float64)
    topics: dict[int, list[tuple[str, float]]] = {}
    for cid, words in candidates.items():
        rows = np.flatnonzero(labeling.labels == cid)
        if len(rows) == 0 or not words:
            topics[cid] = []
            log.warning("cluster %d has no members or candidates", cid)
            continue
        centroid = values[rows].mean(axis=0)
        norm = np.linalg.norm(centroid)
        if norm == 0.0:
            topics[cid] = []
            log.warning("cluster %d centroid is zero; skipping", cid)
            continue
        centroid = centroid / norm
        sims = unit[[word_row[w] for w in words]] @ centroid
        ranked = sorted(zip(words, sims), key=lambda ws: (-ws[1], ws[0]))
        topics[cid] = [(w, float(s)) for w, s in ranked]
    return TopicModel(topics, base.cluster_sizes, method="keybert")


def top_words(model: TopicModel, n: int = 10) -> dict[int, list[str]]:
    """First n words per topic; shorter topics are returned whole."""
    if n < 0:
        raise ParameterError("n must be >= 0")
    return {cid: [w for w, _ in ranked[:n]] for cid, ranked in model.topics.items()}
