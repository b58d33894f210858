import json

import pytest

from topiclab.ctc import (
    HttpTransport,
    IntrusionTrial,
    RecordingTransport,
    ReplayTransport,
    build_intrusion_trial,
    ctc_report,
    prompt_hash,
    render_intrusion_prompt,
    render_rating_prompt,
    score_intrusion,
    score_rating,
)
from topiclab.errors import InvalidTrialError, ParameterError, TransportError
from topiclab.topics import TopicModel


def two_topic_model():
    return TopicModel(
        topics={
            0: [(w, 10.0 - i) for i, w in enumerate(
                ["mask", "masks", "wearing", "cloth", "cover",
                 "face", "n95", "mandate", "mouth", "nose"])],
            1: [(w, 10.0 - i) for i, w in enumerate(
                ["vaccine", "dose", "shot", "mrna", "jab",
                 "booster", "trial", "immunity", "pfizer", "vial"])],
        },
        cluster_sizes={0: 30, 1: 25},
        method="ctfidf",
    )


class FakeTransport:
    def __init__(self, responder):
        self.responder = responder
        self.prompts = []

    def send(self, prompt, temperature=0.0, max_tokens=256):
        self.prompts.append(prompt)
        return self.responder(prompt)


def test_trial_construction_disjoint_vocabulary():
    trial = build_intrusion_trial(two_topic_model(), 0, seed=7)
    assert len(trial.true_intruders) == 5
    assert trial.true_intruders <= set(two_topic_model().topics[1][i][0] for i in range(10))
    assert set(trial.presented_words) >= trial.true_intruders
    assert len(trial.presented_words) == 15


def test_trial_deterministic():
    t1 = build_intrusion_trial(two_topic_model(), 0, seed=42)
    t2 = build_intrusion_trial(two_topic_model(), 0, seed=42)
    assert t1 == t2
    t3 = build_intrusion_trial(two_topic_model(), 0, seed=43)
    assert t3.presented_words != t1.presented_words  # overwhelmingly likely


def test_trial_excludes_shared_words():
    model = TopicModel(
        topics={
            0: [("shared", 5.0), ("alpha", 4.0), ("beta", 3.0)],
            1: [("shared", 5.0), ("gamma", 4.0), ("delta", 3.0)],
        },
        cluster_sizes={0: 3, 1: 3},
        method="ctfidf",
    )
    for seed in range(20):
        trial = build_intrusion_trial(model, 0, n_intruders=2, seed=seed)
        assert "shared" not in trial.true_intruders


def test_trial_reduced_intruders_warns(caplog):
    model = TopicModel(
        topics={0: [("a", 2.0), ("b", 1.0)], 1: [("c", 2.0), ("d", 1.0)]},
        cluster_sizes={0: 2, 1: 2},
        method="ctfidf",
    )
    with caplog.at_level("WARNING"):
        trial = build_intrusion_trial(model, 0, n_intruders=5, seed=0)
    assert len(trial.true_intruders) == 2
    assert any("reducing" in r.message for r in caplog.records)


def test_trial_needs_two_topics():
    model = TopicModel(topics={0: [("a", 1.0)]}, cluster_sizes={0: 1}, method="ctfidf")
    with pytest.raises(ParameterError):
        build_intrusion_trial(model, 0)


def test_intrusion_perfect_flags():
    trial = build_intrusion_trial(two_topic_model(), 0, seed=3)
    transport = FakeTransport(lambda p: "INTRUDER: " + "\nINTRUDER: ".join(sorted(trial.true_intruders)))
    score, done = score_intrusion(trial, transport)
    assert score == 1.0
    assert done.llm_flagged == trial.true_intruders


def test_intrusion_nothing_flagged():
    trial = build_intrusion_trial(two_topic_model(), 0, seed=3)
    transport = FakeTransport(lambda p: "all of these fit together nicely")
    score, done = score_intrusion(trial, transport)
    assert score == 0.0
    assert done.llm_flagged == frozenset()


def test_intrusion_jaccard_four_sevenths():
    # flag 4 of the 5 intruders plus 2 of the topic's own words:
    # |intersection| = 4, |union| = 5 + 2 = 7
    trial = build_intrusion_trial(two_topic_model(), 0, seed=11)
    intruders = sorted(trial.true_intruders)
    own = [w for w in trial.presented_words if w not in trial.true_intruders]
    response = "Category: " + own[0] + ". INTRUDER: " + ", ".join(intruders[:4]) + \
               ", INTRUDER: " + own[1]
    score, done = score_intrusion(trial, FakeTransport(lambda p: response))
    assert len(done.llm_flagged) == 6
    assert score == pytest.approx(4 / 7)


def test_intrusion_case_insensitive_matching():
    trial = IntrusionTrial(0, ("Alpha", "beta", "GAMMA"), frozenset(["GAMMA"]))
    score, done = score_intrusion(trial, FakeTransport(lambda p: "INTRUDER: gamma"))
    assert done.llm_flagged == {"GAMMA"}
    assert score == 1.0


def test_rating_parses_bare_integer():
    assert score_rating(["a", "b"], FakeTransport(lambda p: "2")) == 2.0


def test_rating_first_integer_rule():
    resp = "Rating: 3 - meaningful and highly coherent"
    assert score_rating(["a", "b"], FakeTransport(lambda p: resp)) == 3.0
    # out-of-range integers are skipped; the first in-range one wins
    resp2 = "I give it 10 out of 10, so 3"
    assert score_rating(["a", "b"], FakeTransport(lambda p: resp2)) == 3.0
    resp3 = "2, though arguably 3"
    assert score_rating(["a", "b"], FakeTransport(lambda p: resp3)) == 2.0


def test_rating_unparseable_invalid():
    with pytest.raises(InvalidTrialError):
        score_rating(["a", "b"], FakeTransport(lambda p: "excellent"))


def test_rating_scale_anchors_in_prompt():
    prompt = render_rating_prompt(["mask", "cloth"])
    assert "meaningful and highly coherent" in prompt
    assert "useless" in prompt
    assert "mask, cloth" in prompt


def build_replay_file(path, model, seed, intrusion_response, rating_response):
    records = []
    for tid in model.topic_ids(include_outlier=False):
        from topiclab.rng import derive_seed

        trial = build_intrusion_trial(model, tid, seed=derive_seed(seed, tid))
        records.append({
            "prompt_hash": prompt_hash(render_intrusion_prompt(trial)),
            "response": intrusion_response(trial),
        })
        words = [w for w, _ in model.topics[tid][:10]]
        records.append({
            "prompt_hash": prompt_hash(render_rating_prompt(words)),
            "response": rating_response(tid),
        })
    path.write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in records),
        encoding="utf-8",
    )


def test_ctc_report_all_perfect(tmp_path):
    model = two_topic_model()
    replay = tmp_path / "replay.jsonl"
    build_replay_file(
        replay, model, seed=5,
        intrusion_response=lambda t: "INTRUDER: " + ", ".join(sorted(t.true_intruders)),
        rating_response=lambda tid: "3",
    )
    scores = ctc_report(model, ReplayTransport(replay), seed=5)
    assert scores.intrusion == 1.0
    assert scores.rating == 3.0  # scale ceiling
    assert not scores.inconclusive


def test_ctc_report_byte_identical(tmp_path):
    model = two_topic_model()
    replay = tmp_path / "replay.jsonl"
    build_replay_file(
        replay, model, seed=9,
        intrusion_response=lambda t: "INTRUDER: " + ", ".join(sorted(t.true_intruders)[:3]),
        rating_response=lambda tid: f"{1 + tid}",
    )
    r1 = ctc_report(model, ReplayTransport(replay), seed=9)
    r2 = ctc_report(model, ReplayTransport(replay), seed=9)
    assert r1.to_json().encode() == r2.to_json().encode()
    assert 0.0 <= r1.intrusion <= 1.0
    assert 0.0 <= r1.rating <= 3.0


def test_ctc_report_all_invalid_inconclusive(tmp_path):
    model = two_topic_model()
    replay = tmp_path / "replay.jsonl"
    build_replay_file(
        replay, model, seed=2,
        intrusion_response=lambda t: "",  # empty: flags nothing -> score 0 (valid!)
        rating_response=lambda tid: "hopeless",
    )
    scores = ctc_report(model, ReplayTransport(replay), seed=2)
    assert scores.rating is None and scores.n_valid_rating == 0
    # intrusion trials still valid (empty flag set scores 0)
    assert scores.intrusion == 0.0


def test_ctc_missing_replay_marks_invalid(tmp_path):
    model = two_topic_model()
    replay = tmp_path / "replay.jsonl"
    replay.write_text("", encoding="utf-8")
    scores = ctc_report(model, ReplayTransport(replay), seed=1)
    assert scores.inconclusive


def test_recording_transport_round_trip(tmp_path):
    inner = FakeTransport(lambda p: "INTRUDER: none (3)")
    path = tmp_path / "rec.jsonl"
    recording = RecordingTransport(inner, path)
    model = two_topic_model()
    live = ctc_report(model, recording, seed=4)
    replayed = ctc_report(model, ReplayTransport(path), seed=4)
    assert live.to_json() == replayed.to_json()


def test_http_transport_retries(monkeypatch):
    calls = []

    class FakeResponse:
        status_code = 200

        def raise_for_status(self):
            pass

        def json(self):
            return {"choices": [{"message": {"content": "3"}}]}

    def fake_post(url, json=None, headers=None, timeout=None):
        calls.append(url)
        if len(calls) < 3:
            raise ConnectionError("nope")
        return FakeResponse()

    import requests

    monkeypatch.setattr(requests, "post", fake_post)
    monkeypatch.setattr("time.sleep", lambda s: None)
    transport = HttpTransport("http://example.invalid/v1/chat", "judge")
    assert transport.send("prompt") == "3"
    assert len(calls) == 3


def test_http_transport_rate_limit(monkeypatch):
    import requests

    class FakeResponse:
        status_code = 200

        def raise_for_status(self):
            pass

        def json(self):
            return {"choices": [{"message": {"content": "ok"}}]}

    sleeps = []
    monkeypatch.setattr(requests, "post",
                        lambda url, json=None, headers=None, timeout=None: FakeResponse())
    monkeypatch.setattr("time.sleep", lambda s: sleeps.append(s))
    transport = HttpTransport("http://example.invalid/v1", "judge", rate_limit_s=5.0)
    transport.send("one")
    transport.send("two")
    assert sleeps and sleeps[0] > 0  # second call waited out the interval


def test_http_transport_gives_up(monkeypatch):
    import requests

    def fake_post(url, json=None, headers=None, timeout=None):
        raise ConnectionError("still down")

    monkeypatch.setattr(requests, "post", fake_post)
    monkeypatch.setattr("time.sleep", lambda s: None)
    transport = HttpTransport("http://example.invalid/v1/chat", "judge")
    with pytest.raises(TransportError):
        transport.send("prompt")
