"""End-to-end orchestration: config file -> artifacts on disk.

Stage order: ingest -> preprocess -> embed (or load) -> sweep -> select
(both rules) -> cluster -> topics -> coherence [-> ctc].  A manifest
records every seed, the config digest, and a sha256 per output so any
output is reproducible from the manifest alone.  All artifact bytes are
deterministic for a fixed config.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coherence import METRIC_NAMES, CoherenceReport, coherence_report
from .corpus import (
    Corpus,
    bundled_stopwords,
    filter_split,
    load_corpus,
    preprocess_corpus,
    tokenize_corpus,
)
from .ctc import HttpTransport, ReplayTransport, ctc_report
from .embedding_io import (
    EmbeddingMatrix,
    ProviderSpec,
    fetch_embeddings,
    read_embeddings,
    write_embeddings,
)
from .errors import ConfigurationError, EmptySelectionError
from .hdbscan import HdbscanParams, Labeling, hdbscan_cluster
from .rng import derive_seed
from .sweep import (
    GridSpec,
    RunRecord,
    persist_records,
    run_grid,
    select_diverse,
    select_top,
)
from .topics import TopicModel, ctfidf, keybert_topics, merge_cluster_docs
from .umap import UmapParams, umap_reduce

log = logging.getLogger(__name__)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class PipelineConfig:
    corpus_path: str
    corpus_format: str = "csv"
    field_map: dict = field(default_factory=dict)
    split: dict | None = None
    embeddings_path: str | None = None
    provider_command: str | None = None
    provider_model: str = "[para]"
    provider_batch_size: int = 32
    grid: GridSpec = field(default_factory=GridSpec)
    umap_metric: str = "cosine"
    umap_n_epochs: int = 500
    dbcv_space: str = "reduced"
    topics_method: str = "ctfidf"
    topics_top: int = 10
    topics_candidates: int = 50
    coherence_metrics: tuple[str, ...] = METRIC_NAMES
    coherence_top: int = 10
    include_outlier: bool = False
    ctc_enabled: bool = False
    ctc_mock: str | None = None
    ctc_endpoint: str | None = None
    ctc_model: str | None = None
    seed: int = 0

    @staticmethod
    def from_toml(path: str | Path, overrides: dict | None = None) -> "PipelineConfig":
        try:
            with Path(path).open("rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid TOML ({exc})") from exc
        return PipelineConfig.from_dict(raw, overrides)

    @staticmethod
    def from_dict(raw: dict, overrides: dict | None = None) -> "PipelineConfig":
        corpus = raw.get("corpus", {})
        if "path" not in corpus:
            raise ConfigurationError("config needs [corpus] path")
        grid_raw = raw.get("grid", {})
        seed = raw.get("seed", 0)
        if overrides and overrides.get("seed") is not None:
            seed = overrides["seed"]
        grid = GridSpec(
            n_neighbors=tuple(grid_raw.get("n_neighbors", (5, 20, 50, 100, 200))),
            min_dist=tuple(grid_raw.get("min_dist", (0.0, 0.09))),
            n_components=tuple(grid_raw.get("n_components", (2, 20, 100, 200))),
            min_samples=tuple(grid_raw.get("min_samples", (5, 10))),
            min_cluster_size=tuple(grid_raw.get("min_cluster_size", (10, 15, 20, 30))),
            selection_methods=tuple(grid_raw.get("selection_methods", ("eom",))),
            seed=derive_seed(seed, "sweep"),
        )
        provider = raw.get("provider", {})
        topics = raw.get("topics", {})
        coherence = raw.get("coherence", {})
        ctc = raw.get("ctc", {})
        umap_cfg = raw.get("umap", {})
        return PipelineConfig(
            corpus_path=corpus["path"],
            corpus_format=corpus.get("format", "csv"),
            field_map={
                k: corpus.get(f"{k}_col")
                for k in ("id", "text", "country", "language", "label", "published")
                if corpus.get(f"{k}_col")
            },
            split=raw.get("split") or None,
            embeddings_path=raw.get("embeddings", {}).get("path"),
            provider_command=provider.get("command"),
            provider_model=provider.get("model", "[para]"),
            provider_batch_size=provider.get("batch_size", 32),
            grid=grid,
            umap_metric=umap_cfg.get("metric", "cosine"),
            umap_n_epochs=umap_cfg.get("n_epochs", 500),
            dbcv_space=grid_raw.get("dbcv_space", "reduced"),
            topics_method=topics.get("method", "ctfidf"),
            topics_top=topics.get("top", 10),
            topics_candidates=topics.get("candidates", 50),
            coherence_metrics=tuple(coherence.get("metrics", METRIC_NAMES)),
            coherence_top=coherence.get("top", 10),
            include_outlier=coherence.get("include_outlier", False),
            ctc_enabled=ctc.get("enabled", False),
            ctc_mock=ctc.get("mock"),
            ctc_endpoint=ctc.get("endpoint"),
            ctc_model=ctc.get("model"),
            seed=seed,
        )

    def validate(self) -> None:
        if not Path(self.corpus_path).exists():
            raise ConfigurationError(f"corpus path not found: {self.corpus_path}")
        have_embeddings = self.embeddings_path and Path(self.embeddings_path).exists()
        if not have_embeddings and not self.provider_command:
            raise ConfigurationError(
                "no embeddings file and no provider command configured"
            )
        if self.topics_method not in ("ctfidf", "keybert"):
            raise ConfigurationError(f"unknown topics method {self.topics_method!r}")
        if self.topics_method == "keybert" and not self.provider_command:
            raise ConfigurationError("keybert extraction needs a provider command")
        if self.ctc_enabled and not (self.ctc_mock or self.ctc_endpoint):
            raise ConfigurationError("ctc enabled but neither mock nor endpoint set")
        if self.dbcv_space not in ("reduced", "original"):
            raise ConfigurationError(f"unknown dbcv_space {self.dbcv_space!r}")

    def digest(self) -> str:
        payload = json.dumps(
            {k: v for k, v in self.__dict__.items() if k != "grid"}
            | {"grid": self.grid.__dict__},
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")


def write_corpus_jsonl(corpus: Corpus, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for d in corpus:
            fh.write(json.dumps({
                "id": d.id, "text": d.text, "country": d.country,
                "language": d.language, "label": d.label, "published": d.published,
            }, sort_keys=True, ensure_ascii=False) + "\n")


def read_corpus_jsonl(path: str | Path) -> Corpus:
    return load_corpus(path, "jsonl")


def write_labels_csv(corpus_ids: list[str], labeling: Labeling, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label", "probability"])
        for did, lab, prob in zip(corpus_ids, labeling.labels, labeling.probabilities):
            writer.writerow([did, int(lab), format(float(prob), ".9g")])


def read_labels_csv(path: str | Path) -> tuple[list[str], Labeling]:
    ids, labels, probs = [], [], []
    with Path(path).open(encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            ids.append(row["id"])
            labels.append(int(row["label"]))
            probs.append(float(row["probability"]))
    return ids, Labeling(np.asarray(labels, dtype=np.int64), np.asarray(probs))


def write_topics_json(model: TopicModel, path: Path) -> None:
    payload = {
        "method": model.method,
        "topics": {
            str(cid): [[w, float(s)] for w, s in ranked]
            for cid, ranked in sorted(model.topics.items())
        },
        "cluster_sizes": {str(c): n for c, n in sorted(model.cluster_sizes.items())},
    }
    _write_json(path, payload)


def read_topics_json(path: str | Path) -> TopicModel:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return TopicModel(
        topics={int(c): [(w, float(s)) for w, s in ranked]
                for c, ranked in data["topics"].items()},
        cluster_sizes={int(c): int(n) for c, n in data["cluster_sizes"].items()},
        method=data["method"],
    )


def write_coherence_json(report: CoherenceReport, path: Path) -> None:
    _write_json(path, {
        "per_topic": {str(c): row for c, row in sorted(report.per_topic.items())},
        "mean": report.mean,
        "n_words": report.n_words,
        "include_outlier": report.include_outlier,
    })


def export_projection(
    matrices: list[EmbeddingMatrix],
    labelings: list[np.ndarray],
    nations: list[str],
    seed: int,
    path: Path,
    n_neighbors: int = 15,
    min_dist: float = 0.1,
    metric: str = "cosine",
    n_epochs: int = 500,
) -> None:
    """Joint 2-D layout of several corpora for plotting.

    CSV columns: id, nation, cluster, x, y.  Labels are taken as given (one
    array per matrix, -1 allowed); the layout runs on the concatenation.
    """
    if not matrices:
        raise ConfigurationError("need at least one embedding matrix")
    dims = {m.dim for m in matrices}
    if len(dims) != 1:
        raise ConfigurationError(f"embedding dims differ across inputs: {sorted(dims)}")
    if not (len(matrices) == len(labelings) == len(nations)):
        raise ConfigurationError("matrices, labelings and nations must align")
    for m, lab in zip(matrices, labelings):
        if m.n_rows != len(lab):
            raise ConfigurationError("labels do not align with embedding rows")
    X = np.vstack([m.values for m in matrices])
    params = UmapParams(
        n_neighbors=n_neighbors, n_components=2, min_dist=min_dist,
        metric=metric, n_epochs=n_epochs, seed=seed,
    )
    projection = umap_reduce(X, params)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "nation", "cluster", "x", "y"])
        row = 0
        for matrix, labels, nation in zip(matrices, labelings, nations):
            for i, did in enumerate(matrix.ids):
                x, y = projection.coords[row]
                writer.writerow([
                    did, nation, int(labels[i]),
                    format(float(x), ".6f"), format(float(y), ".6f"),
                ])
                row += 1


@dataclass
class StageResult:
    name: str
    seed: int | None
    outputs: dict[str, Path]


def run_pipeline(config: PipelineConfig, out_dir: str | Path) -> Path:
    """Execute all stages, returning the manifest path.

    Raises ConfigurationError for invalid configs and TopiclabError
    subclasses for stage failures; the CLI maps these to exit codes 2/1.
    """
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stages: list[StageResult] = []

    # ingest + split
    corpus = load_corpus(config.corpus_path, config.corpus_format, config.field_map)
    if config.split:
        corpus = filter_split(
            corpus,
            country=config.split.get("country", ""),
            language=config.split.get("language", ""),
            label=config.split.get("label", "fake"),
        )
    corpus_file = out / "corpus.jsonl"
    write_corpus_jsonl(corpus, corpus_file)
    stages.append(StageResult("ingest", None, {"corpus": corpus_file}))

    # preprocess
    corpus = preprocess_corpus(corpus)
    pre_file = out / "preprocessed.jsonl"
    write_corpus_jsonl(corpus, pre_file)
    stages.append(StageResult("preprocess", None, {"corpus": pre_file}))

    # embeddings: load if present, else call the provider
    if config.embeddings_path and Path(config.embeddings_path).exists():
        matrix = read_embeddings(config.embeddings_path)
        if list(matrix.ids) != corpus.ids:
            raise ConfigurationError("embedding ids do not match the corpus")
    else:
        provider = ProviderSpec(
            command=config.provider_command,
            model_name=config.provider_model,
            batch_size=config.provider_batch_size,
        )
        matrix = fetch_embeddings(corpus, provider)
    emb_file = out / "embeddings.emb1"
    write_embeddings(matrix, emb_file)
    stages.append(StageResult("embed", None, {"embeddings": emb_file}))

    # sweep
    base = UmapParams(metric=config.umap_metric, n_epochs=config.umap_n_epochs,
                      seed=config.grid.seed)
    records = run_grid(matrix, config.grid, base=base, dbcv_space=config.dbcv_space)
    records_file = out / "records.jsonl"
    persist_records(records, records_file)
    stages.append(StageResult("sweep", config.grid.seed, {"records": records_file}))

    # select both rules; the diverse rule may legitimately find nothing
    selections: dict[str, RunRecord] = {"top": select_top(records)}
    try:
        selections["diverse"] = select_diverse(records)
    except EmptySelectionError as exc:
        log.warning("diverse selection skipped: %s", exc)
    for rule, record in selections.items():
        _write_json(out / f"selected_{rule}.json", json.loads(record.to_json()))

    stopwords = bundled_stopwords()
    tokenized = tokenize_corpus(corpus, stopwords)

    for rule, record in selections.items():
        rule_dir = out / rule
        rule_dir.mkdir(parents=True, exist_ok=True)
        cell = record.params
        uparams = UmapParams(
            n_neighbors=cell["n_neighbors"], n_components=cell["n_components"],
            min_dist=cell["min_dist"], metric=config.umap_metric,
            n_epochs=config.umap_n_epochs, seed=record.seed,
        )
        projection = umap_reduce(matrix, uparams)
        labeling = hdbscan_cluster(projection.coords, HdbscanParams(
            min_cluster_size=cell["min_cluster_size"],
            min_samples=cell["min_samples"],
            cluster_selection_method=cell["selection_method"],
        ))
        labels_file = rule_dir / "labels.csv"
        write_labels_csv(corpus.ids, labeling, labels_file)
        stages.append(StageResult(f"cluster[{rule}]", record.seed,
                                  {"labels": labels_file}))

        classes = merge_cluster_docs(tokenized, labeling)
        if config.topics_method == "keybert":
            provider = ProviderSpec(config.provider_command, config.provider_model,
                                    config.provider_batch_size)
            model = keybert_topics(classes, matrix, labeling, provider,
                                   config.topics_candidates)
        else:
            model = ctfidf(classes, labeling)
        topics_file = rule_dir / "topics.json"
        write_topics_json(model, topics_file)
        stages.append(StageResult(f"topics[{rule}]", None, {"topics": topics_file}))

        report = coherence_report(
            model, tokenized, n_words=config.coherence_top,
            include_outlier=config.include_outlier,
            metrics=config.coherence_metrics,
        )
        coherence_file = rule_dir / "coherence.json"
        write_coherence_json(report, coherence_file)
        stages.append(StageResult(f"coherence[{rule}]", None,
                                  {"coherence": coherence_file}))

        if config.ctc_enabled:
            transport = (ReplayTransport(config.ctc_mock) if config.ctc_mock
                         else HttpTransport(config.ctc_endpoint, config.ctc_model))
            ctc_seed = derive_seed(config.seed, "ctc", rule)
            scores = ctc_report(model, transport, seed=ctc_seed,
                                n_topic_words=config.topics_top,
                                include_outlier=config.include_outlier)
            ctc_file = rule_dir / "ctc.json"
            ctc_file.write_text(scores.to_json(), encoding="utf-8")
            stages.append(StageResult(f"ctc[{rule}]", ctc_seed, {"ctc": ctc_file}))

    manifest = {
        "tool": "topiclab",
        "version": __version__,
        "seed": config.seed,
        "config_digest": config.digest(),
        "stages": [
            {
                "name": s.name,
                "seed": s.seed,
                "outputs": {
                    k: {"path": str(p.relative_to(out)), "sha256": _sha256(p)}
                    for k, p in s.outputs.items()
                },
            }
            for s in stages
        ],
    }
    manifest_file = out / "manifest.json"
    _write_json(manifest_file, manifest)
    return manifest_file
