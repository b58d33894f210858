"""Topic-coherence metrics over a tokenized reference corpus.

Four classics: document-level u_mass, sliding-window c_uci and c_npmi
(window 10), and c_v (window 110, NPMI context vectors, indirect cosine).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import TokenizedDocument
from .errors import ParameterError, UndefinedMetricError
from .topics import TopicModel, top_words

log = logging.getLogger(__name__)

EPSILON = 1e-12
UCI_WINDOW = 10
CV_WINDOW = 110
METRIC_NAMES = ("c_v", "u_mass", "c_uci", "c_npmi")


@dataclass(frozen=True)
class WindowStats:
    """Virtual-document counts: how many windows contain each word / pair."""

    window_size: int
    n_windows: int
    word_count: dict[str, int]
    pair_count: dict[tuple[str, str], int]

    def count(self, w: str) -> int:
        return self.word_count.get(w, 0)

    def pair(self, a: str, b: str) -> int:
        if a == b:
            return self.count(a)
        key = (a, b) if a < b else (b, a)
        return self.pair_count.get(key, 0)

    def p(self, w: str) -> float:
        return self.count(w) / self.n_windows

    def p_pair(self, a: str, b: str) -> float:
        return self.pair(a, b) / self.n_windows


def build_window_stats(
    docs: Sequence[TokenizedDocument],
    window_size: int,
    vocabulary: set[str] | None = None,
) -> WindowStats:
    """Count word and pair occurrences over sliding windows.

    Every contiguous span of window_size tokens is one window; documents
    shorter than the window contribute a single whole-document window.
    Restricting to a vocabulary only drops untracked words from the counts.
    """
    if window_size < 1:
        raise ParameterError("window_size must be >= 1")
    if not docs:
        raise ParameterError("empty reference corpus")
    word_count: dict[str, int] = {}
    pair_count: dict[tuple[str, str], int] = {}
    n_windows = 0
    for doc in docs:
        tokens = list(doc.tokens)
        if not tokens:
            continue
        spans = (
            [tokens]
            if len(tokens) <= window_size
            else [tokens[i : i + window_size] for i in range(len(tokens) - window_size + 1)]
        )
        for span in spans:
            n_windows += 1
            present = set(span)
            if vocabulary is not None:
                present &= vocabulary
            for w in present:
                word_count[w] = word_count.get(w, 0) + 1
            ordered = sorted(present)
            for i, a in enumerate(ordered):
                for b in ordered[i + 1 :]:
                    pair_count[(a, b)] = pair_count.get((a, b), 0) + 1
    if n_windows == 0:
        raise ParameterError("reference corpus has no non-empty documents")
    return WindowStats(window_size, n_windows, word_count, pair_count)


def document_stats(
    docs: Sequence[TokenizedDocument], vocabulary: set[str] | None = None
) -> WindowStats:
    """Document-level co-occurrence: each document is a single window."""
    if not docs:
        raise ParameterError("empty reference corpus")
    longest = max((len(d.tokens) for d in docs), default=1)
    return build_window_stats(docs, max(longest, 1), vocabulary)


def umass(topic_words: Sequence[str], doc_stats: WindowStats) -> float:
    """(2 / N(N-1)) * sum_{i>j} ln((D(w_i, w_j) + 1) / D(w_j))."""
    words = list(topic_words)
    if len(words) < 2:
        raise ParameterError("u_mass needs >= 2 topic words")
    total = 0.0
    used = 0
    for i in range(1, len(words)):
        for j in range(i):
            d_j = doc_stats.count(words[j])
            if d_j == 0:
                log.warning("u_mass: conditioning word %r never occurs; pair skipped", words[j])
                continue
            joint = doc_stats.pair(words[i], words[j])
            total += math.log((joint + 1.0) / d_j)
            used += 1
    if used == 0:
        raise UndefinedMetricError("u_mass: every pair was skipped")
    n = len(words)
    return (2.0 / (n * (n - 1))) * total


def _pmi(stats: WindowStats, a: str, b: str) -> float | None:
    pa, pb = stats.p(a), stats.p(b)
    if pa == 0.0 or pb == 0.0:
        return None
    return math.log((stats.p_pair(a, b) + EPSILON) / (pa * pb))


def cuci(topic_words: Sequence[str], stats: WindowStats) -> float:
    """Mean pairwise PMI with an epsilon-smoothed joint probability."""
    words = list(topic_words)
    if len(words) < 2:
        raise ParameterError("c_uci needs >= 2 topic words")
    vals = []
    for i, a in enumerate(words):
        for b in words[i + 1 :]:
            pmi = _pmi(stats, a, b)
            if pmi is None:
                log.warning("c_uci: %r or %r never occurs; pair skipped", a, b)
                continue
            vals.append(pmi)
    if not vals:
        raise UndefinedMetricError("c_uci: every pair was skipped")
    return float(np.mean(vals))


def _npmi(stats: WindowStats, a: str, b: str) -> float | None:
    pmi = _pmi(stats, a, b)
    if pmi is None:
        return None
    return pmi / -math.log(stats.p_pair(a, b) + EPSILON)


def cnpmi(topic_words: Sequence[str], stats: WindowStats) -> float:
    """Mean pairwise NPMI: PMI normalized by -ln(P(joint) + eps)."""
    words = list(topic_words)
    if len(words) < 2:
        raise ParameterError("c_npmi needs >= 2 topic words")
    vals = []
    for i, a in enumerate(words):
        for b in words[i + 1 :]:
            npmi = _npmi(stats, a, b)
            if npmi is None:
                log.warning("c_npmi: %r or %r never occurs; pair skipped", a, b)
                continue
            vals.append(npmi)
    if not vals:
        raise UndefinedMetricError("c_npmi: every pair was skipped")
    return float(np.mean(vals))


def cv(topic_words: Sequence[str], stats: WindowStats) -> float:
    """One-set segmentation with NPMI context vectors and indirect cosine.

    Each word's context vector holds its NPMI against every topic word
    (self included); the score is the mean cosine between a word's vector
    and the sum of all vectors.  All-zero vectors are skipped.
    """
    words = list(topic_words)
    if len(words) < 2:
        raise ParameterError("c_v needs >= 2 topic words")
    if len(set(words)) != len(words):
        raise ParameterError("c_v topic words must be unique")
    vectors = np.zeros((len(words), len(words)))
    for i, a in enumerate(words):
        for j, b in enumerate(words):
            npmi = _npmi(stats, a, b)
            vectors[i, j] = 0.0 if npmi is None else npmi
    total = vectors.sum(axis=0)
    total_norm = float(np.linalg.norm(total))
    sims = []
    for i in range(len(words)):
        norm = float(np.linalg.norm(vectors[i]))
        if norm == 0.0 or total_norm == 0.0:
            log.warning("c_v: context vector for %r is zero; skipped", words[i])
            continue
        sims.append(float(vectors[i] @ total) / (norm * total_norm))
    if not sims:
        raise UndefinedMetricError("c_v: all context vectors are zero")
    return float(np.mean(sims))


@dataclass(frozen=True)
class CoherenceReport:
    per_topic: dict[int, dict[str, float]]
    mean: dict[str, float]
    n_words: int
    include_outlier: bool


def coherence_report(
    topics: TopicModel,
    reference: Sequence[TokenizedDocument],
    n_words: int = 10,
    include_outlier: bool = False,
    metrics: Sequence[str] = METRIC_NAMES,
) -> CoherenceReport:
    """All requested metrics per topic plus their arithmetic means.

    The outlier topic (-1) is always scored but only enters the means when
    include_outlier is set.  Documents left empty by stopword removal are
    ignored by the reference statistics.
    """
    bad = [m for m in metrics if m not in METRIC_NAMES]
    if bad:
        raise ParameterError(f"unknown metrics {bad}; choose from {METRIC_NAMES}")
    words_per_topic = {
        cid: ws for cid, ws in top_words(topics, n_words).items() if len(ws) >= 2
    }
    skipped = set(topics.topics) - set(words_per_topic)
    if skipped:
        log.warning("topics %s have < 2 words and are not scored", sorted(skipped))
    if not words_per_topic:
        raise UndefinedMetricError("no topic has >= 2 words to score")
    docs = [d for d in reference if d.tokens]
    vocab = {w for ws in words_per_topic.values() for w in ws}
    doc_level = document_stats(docs, vocab)
    win10 = build_window_stats(docs, UCI_WINDOW, vocab) if {"c_uci", "c_npmi"} & set(metrics) else None
    win110 = build_window_stats(docs, CV_WINDOW, vocab) if "c_v" in metrics else None

    per_topic: dict[int, dict[str, float]] = {}
    for cid in sorted(words_per_topic):
        ws = words_per_topic[cid]
        row: dict[str, float] = {}
        if "c_v" in metrics:
            row["c_v"] = cv(ws, win110)
        if "u_mass" in metrics:
            row["u_mass"] = umass(ws, doc_level)
        if "c_uci" in metrics:
            row["c_uci"] = cuci(ws, win10)
        if "c_npmi" in metrics:
            row["c_npmi"] = cnpmi(ws, win10)
        per_topic[cid] = row

    included = [c for c in per_topic if include_outlier or c >= 0]
    if not included:
        raise UndefinedMetricError("no topics left after outlier exclusion")
    mean = {
        m: float(np.mean([per_topic[c][m] for c in included]))
        for m in metrics
    }
    return CoherenceReport(per_topic, mean, n_words, include_outlier)
