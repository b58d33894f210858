"""LLM-judged topic coherence: word-intrusion and usefulness-rating scores.

Transports are pluggable; the replay transport answers from a recorded
JSONL file so the whole scoring path runs deterministically offline.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol

from .errors import InvalidTrialError, ParameterError, TransportError
from .rng import Rng, derive_seed
from .topics import TopicModel, top_words

log = logging.getLogger(__name__)

API_KEY_ENV = "TOPICLAB_API_KEY"


def _template(name: str) -> str:
    return resources.files("topiclab").joinpath(f"prompts/{name}.txt").read_text("utf-8")


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class LlmTransport(Protocol):
    def send(self, prompt: str, temperature: float = 0.0, max_tokens: int = 256) -> str: ...


class ReplayTransport:
    """Answers from a JSONL file of {"prompt_hash", "response"} records."""

    def __init__(self, path: str | Path):
        self.responses: dict[str, str] = {}
        with Path(path).open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    self.responses[rec["prompt_hash"]] = rec["response"]
                except (json.JSONDecodeError, KeyError) as exc:
                    raise TransportError(f"{path}:{lineno}: bad replay record ({exc})")

    def send(self, prompt: str, temperature: float = 0.0, max_tokens: int = 256) -> str:
        key = prompt_hash(prompt)
        if key not in self.responses:
            raise TransportError(f"no recorded response for prompt hash {key[:12]}...")
        return self.responses[key]


class RecordingTransport:
    """Wraps another transport and appends replay records as it goes."""

    def __init__(self, inner: LlmTransport, path: str | Path):
        self.inner = inner
        self.path = Path(path)

    def send(self, prompt: str, temperature: float = 0.0, max_tokens: int = 256) -> str:
        response = self.inner.send(prompt, temperature, max_tokens)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(
                {"prompt_hash": prompt_hash(prompt), "response": response},
                ensure_ascii=False, sort_keys=True,
            ) + "\n")
        return response


class HttpTransport:
    """Minimal chat-completion POST with bearer token and backoff retries.

    Calls are serialized; rate_limit_s spaces consecutive requests.
    """

    def __init__(self, endpoint: str, model: str, api_key_env: str = API_KEY_ENV,
                 timeout: float = 60.0, max_retries: int = 3,
                 rate_limit_s: float = 0.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.rate_limit_s = rate_limit_s
        self._last_call = 0.0

    def send(self, prompt: str, temperature: float = 0.0, max_tokens: int = 256) -> str:
        import requests

        if self.rate_limit_s > 0.0:
            wait = self._last_call + self.rate_limit_s - time.monotonic()
            if wait > 0:
                time.sleep(wait)
        self._last_call = time.monotonic()
        key = os.environ.get(self.api_key_env, "")
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        last: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                resp = requests.post(self.endpoint, json=body, headers=headers,
                                     timeout=self.timeout)
                if resp.status_code >= 500:
                    raise TransportError(f"server error {resp.status_code}")
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except Exception as exc:  # noqa: BLE001 - every failure is retryable here
                last = exc
                if attempt + 1 < self.max_retries:
                    time.sleep(2.0**attempt)
        raise TransportError(f"transport failed after {self.max_retries} attempts: {last}")


@dataclass(frozen=True)
class IntrusionTrial:
    topic_id: int
    presented_words: tuple[str, ...]
    true_intruders: frozenset[str]
    llm_flagged: frozenset[str] = frozenset()


@dataclass(frozen=True)
class CtcScores:
    intrusion: float | None
    rating: float | None
    per_topic: dict[int, dict[str, float | None]]
    n_valid_intrusion: int
    n_valid_rating: int

    @property
    def inconclusive(self) -> bool:
        return self.n_valid_intrusion == 0 and self.n_valid_rating == 0

    def to_json(self) -> str:
        payload = {
            "intrusion": self.intrusion,
            "rating": self.rating,
            "per_topic": {str(k): v for k, v in sorted(self.per_topic.items())},
            "n_valid_intrusion": self.n_valid_intrusion,
            "n_valid_rating": self.n_valid_rating,
            "inconclusive": self.inconclusive,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def build_intrusion_trial(
    model: TopicModel,
    topic_id: int,
    n_topic_words: int = 10,
    n_intruders: int = 5,
    seed: int = 0,
) -> IntrusionTrial:
    """Seeded trial: this topic's words plus intruders drawn uniformly from
    other topics' top words (never words shared with this topic).
    """
    all_tops = top_words(model, n_topic_words)
    if topic_id not in all_tops:
        raise ParameterError(f"unknown topic {topic_id}")
    if len(all_tops) < 2:
        raise ParameterError("intrusion trials need >= 2 topics")
    own = all_tops[topic_id]
    own_set = set(own)
    foreign = sorted({
        w
        for tid, ws in all_tops.items()
        if tid != topic_id
        for w in ws
        if w not in own_set
    })
    rng = Rng(derive_seed(seed, "intrusion", topic_id))
    if len(foreign) < n_intruders:
        log.warning(
            "topic %d: only %d distinct foreign words (< %d); reducing",
            topic_id, len(foreign), n_intruders,
        )
        n_intruders = len(foreign)
    intruders = rng.sample(foreign, n_intruders)
    presented = list(own) + list(intruders)
    rng.shuffle(presented)
    return IntrusionTrial(topic_id, tuple(presented), frozenset(intruders))


def render_intrusion_prompt(trial: IntrusionTrial) -> str:
    return _template("intrusion").format(words=", ".join(trial.presented_words))


def render_rating_prompt(topic_words: list[str]) -> str:
    return _template("rating").format(words=", ".join(topic_words))


def _flagged_words(response: str, presented: tuple[str, ...]) -> frozenset[str]:
    flagged = set()
    for word in presented:
        if re.search(rf"\b{re.escape(word)}\b", response, flags=re.IGNORECASE):
            flagged.add(word)
    return frozenset(flagged)


def score_intrusion(trial: IntrusionTrial, transport: LlmTransport,
                    temperature: float = 0.0) -> tuple[float, IntrusionTrial]:
    """Jaccard overlap between the words the model flagged and the planted
    intruders; an empty flag set scores 0.
    """
    prompt = render_intrusion_prompt(trial)
    try:
        response = transport.send(prompt, temperature=temperature)
    except TransportError as exc:
        raise InvalidTrialError(f"topic {trial.topic_id}: transport failed ({exc})")
    flagged = _flagged_words(response, trial.presented_words)
    done = IntrusionTrial(trial.topic_id, trial.presented_words, trial.true_intruders, flagged)
    if not flagged:
        return 0.0, done
    union = flagged | trial.true_intruders
    return len(flagged & trial.true_intruders) / len(union), done


_INT_RE = re.compile(r"\d+")


def score_rating(topic_words: list[str], transport: LlmTransport,
                 temperature: float = 0.0) -> float:
    """First integer in {0,1,2,3} found in the response."""
    prompt = render_rating_prompt(topic_words)
    try:
        response = transport.send(prompt, temperature=temperature)
    except TransportError as exc:
        raise InvalidTrialError(f"rating transport failed ({exc})")
    for match in _INT_RE.finditer(response):
        value = int(match.group())
        if value in (0, 1, 2, 3):
            return float(value)
    raise InvalidTrialError(f"no 0-3 rating in response {response!r:.80}")


def ctc_report(
    model: TopicModel,
    transport: LlmTransport,
    seed: int = 0,
    n_topic_words: int = 10,
    n_intruders: int = 5,
    include_outlier: bool = False,
    temperature: float = 0.0,
) -> CtcScores:
    """One intrusion trial and one rating per topic; means over valid trials."""
    topic_ids = model.topic_ids(include_outlier=include_outlier)
    per_topic: dict[int, dict[str, float | None]] = {}
    intrusions: list[float] = []
    ratings: list[float] = []
    for tid in topic_ids:
        words = [w for w, _ in model.topics[tid][:n_topic_words]]
        row: dict[str, float | None] = {"intrusion": None, "rating": None}
        if len(words) >= 2 and len(model.topics) >= 2:
            try:
                trial = build_intrusion_trial(
                    model, tid, n_topic_words, n_intruders, seed=derive_seed(seed, tid)
                )
                score, _ = score_intrusion(trial, transport, temperature)
                row["intrusion"] = score
                intrusions.append(score)
            except InvalidTrialError as exc:
                log.warning("intrusion trial invalid: %s", exc)
        if words:
            try:
                rating = score_rating(words, transport, temperature)
                row["rating"] = rating
                ratings.append(rating)
            except InvalidTrialError as exc:
                log.warning("rating trial invalid: %s", exc)
        per_topic[tid] = row
    report = CtcScores(
        intrusion=(sum(intrusions) / len(intrusions) if intrusions else None),
        rating=(sum(ratings) / len(ratings) if ratings else None),
        per_topic=per_topic,
        n_valid_intrusion=len(intrusions),
        n_valid_rating=len(ratings),
    )
    if report.inconclusive:
        log.warning("CTC report is inconclusive: no valid trials")
    return report
