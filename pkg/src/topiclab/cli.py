"""Command-line interface.

Subcommands: run, ingest, preprocess, embed, sweep, merge, select,
cluster, topics, coherence, ctc, project, report.
Exit codes: 0 success, 1 stage failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, pipeline
from .coherence import METRIC_NAMES, coherence_report
from .corpus import (
    bundled_stopwords,
    filter_split,
    load_corpus,
    preprocess_corpus,
    tokenize_corpus,
)
from .ctc import HttpTransport, ReplayTransport, ctc_report
from .embedding_io import ProviderSpec, fetch_embeddings, read_embeddings, write_embeddings
from .errors import ConfigurationError, TopiclabError
from .hdbscan import HdbscanParams, hdbscan_cluster
from .sweep import (
    GridSpec,
    load_records,
    merge_records,
    persist_records,
    run_grid,
    select_diverse,
    select_top,
)
from .topics import ctfidf, keybert_topics, merge_cluster_docs
from .umap import UmapParams, umap_reduce

log = logging.getLogger("topiclab")

EXIT_OK = 0
EXIT_STAGE = 1
EXIT_CONFIG = 2


def _add_corpus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="raw corpus file")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--id-col", default=None)
    p.add_argument("--text-col", default=None)
    p.add_argument("--country-col", default=None)
    p.add_argument("--language-col", default=None)
    p.add_argument("--label-col", default=None)
    p.add_argument("--date-col", default=None)
    p.add_argument("--country", default=None, help="optional split filter")
    p.add_argument("--language", default=None)
    p.add_argument("--label", default=None)


def _field_map(args) -> dict:
    keys = {
        "id": args.id_col, "text": args.text_col, "country": args.country_col,
        "language": args.language_col, "label": args.label_col,
        "published": args.date_col,
    }
    return {k: v for k, v in keys.items() if v}


def _load_and_split(args):
    corpus = load_corpus(args.input, args.format, _field_map(args))
    if args.country or args.language or args.label:
        corpus = filter_split(
            corpus, args.country or "", args.language or "", args.label or "fake"
        )
    return corpus


def _grid_from_args(args) -> GridSpec:
    if args.grid:
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        with open(args.grid, "rb") as fh:
            raw = tomllib.load(fh).get("grid", {})
    else:
        raw = {}

    def pick(flag, key, default):
        return tuple(flag) if flag else tuple(raw.get(key, default))

    return GridSpec(
        n_neighbors=pick(args.n_neighbors, "n_neighbors", (5, 20, 50, 100, 200)),
        min_dist=pick(args.min_dist, "min_dist", (0.0, 0.09)),
        n_components=pick(args.n_components, "n_components", (2, 20, 100, 200)),
        min_samples=pick(args.min_samples, "min_samples", (5, 10)),
        min_cluster_size=pick(args.min_cluster_size, "min_cluster_size", (10, 15, 20, 30)),
        selection_methods=pick(args.selection_method, "selection_methods", ("eom",)),
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topiclab", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--log-level", default="warning",
                        choices=("debug", "info", "warning", "error"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the whole pipeline from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("ingest", help="load a raw file into canonical corpus JSONL")
    _add_corpus_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("preprocess", help="normalize corpus text")
    p.add_argument("--corpus", required=True, help="canonical corpus JSONL")
    p.add_argument("--out", required=True)

    p = sub.add_parser("embed", help="fetch embeddings through a provider")
    p.add_argument("--corpus", required=True)
    p.add_argument("--provider-cmd", required=True)
    p.add_argument("--model", default="[para]")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--embeddings", required=True, help="output EMB1 path")

    p = sub.add_parser("sweep", help="grid-search UMAP x HDBSCAN, score with DBCV")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--grid", default=None, help="TOML file with a [grid] table")
    p.add_argument("--n-neighbors", type=int, nargs="+", default=None)
    p.add_argument("--min-dist", type=float, nargs="+", default=None)
    p.add_argument("--n-components", type=int, nargs="+", default=None)
    p.add_argument("--min-samples", type=int, nargs="+", default=None)
    p.add_argument("--min-cluster-size", type=int, nargs="+", default=None)
    p.add_argument("--selection-method", nargs="+", default=None)
    p.add_argument("--metric", default="cosine", choices=("cosine", "euclidean"))
    p.add_argument("--n-epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dbcv-space", default="reduced", choices=("reduced", "original"))
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock per cell (breaks byte-identical reruns)")
    p.add_argument("--records", required=True, help="output JSONL")

    p = sub.add_parser("merge", help="merge sweep record files deterministically")
    p.add_argument("--records", nargs="+", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("select", help="apply a selection rule to sweep records")
    p.add_argument("--records", required=True)
    p.add_argument("--rule", choices=("top", "diverse"), default="top")
    p.add_argument("--out", default=None)

    p = sub.add_parser("cluster", help="reduce + cluster with one parameter cell")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--params-from", default=None, help="selected record JSON")
    p.add_argument("--n-neighbors", type=int, default=15)
    p.add_argument("--min-dist", type=float, default=0.1)
    p.add_argument("--n-components", type=int, default=2)
    p.add_argument("--min-samples", type=int, default=5)
    p.add_argument("--min-cluster-size", type=int, default=10)
    p.add_argument("--selection-method", choices=("eom", "leaf"), default="eom")
    p.add_argument("--metric", default="cosine", choices=("cosine", "euclidean"))
    p.add_argument("--n-epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--labels", required=True, help="output CSV")

    p = sub.add_parser("topics", help="extract ranked topic words per cluster")
    p.add_argument("--corpus", required=True, help="preprocessed corpus JSONL")
    p.add_argument("--labels", required=True)
    p.add_argument("--method", choices=("ctfidf", "keybert"), default="ctfidf")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--candidates", type=int, default=50)
    p.add_argument("--embeddings", default=None, help="needed for keybert")
    p.add_argument("--provider-cmd", default=None, help="needed for keybert")
    p.add_argument("--model", default="[para]")
    p.add_argument("--out", required=True)

    p = sub.add_parser("coherence", help="score topics against their corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--metrics", default="cv,umass,cuci,cnpmi")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--include-outlier", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ctc", help="LLM-judged intrusion and rating scores")
    p.add_argument("--topics", required=True)
    p.add_argument("--mock", default=None, help="replay JSONL file")
    p.add_argument("--endpoint", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-outlier", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("project", help="joint 2-D projection CSV for plotting")
    p.add_argument("--embeddings", nargs="+", required=True)
    p.add_argument("--labels", nargs="+", required=True)
    p.add_argument("--nations", nargs="+", required=True)
    p.add_argument("--n-neighbors", type=int, default=15)
    p.add_argument("--min-dist", type=float, default=0.1)
    p.add_argument("--metric", default="cosine", choices=("cosine", "euclidean"))
    p.add_argument("--n-epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="print a summary of a pipeline run directory")
    p.add_argument("--run-dir", required=True)

    return parser


_METRIC_ALIASES = {"cv": "c_v", "umass": "u_mass", "cuci": "c_uci", "cnpmi": "c_npmi"}


def _cmd_run(args) -> int:
    config = pipeline.PipelineConfig.from_toml(args.config, {"seed": args.seed})
    manifest = pipeline.run_pipeline(config, args.out_dir)
    print(f"manifest: {manifest}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    corpus = _load_and_split(args)
    pipeline.write_corpus_jsonl(corpus, Path(args.out))
    print(f"{len(corpus)} documents -> {args.out} (skipped {corpus.skipped_rows})")
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    corpus = preprocess_corpus(pipeline.read_corpus_jsonl(args.corpus))
    pipeline.write_corpus_jsonl(corpus, Path(args.out))
    print(f"preprocessed {len(corpus)} documents -> {args.out}")
    return EXIT_OK


def _cmd_embed(args) -> int:
    corpus = pipeline.read_corpus_jsonl(args.corpus)
    provider = ProviderSpec(args.provider_cmd, args.model, args.batch_size)
    matrix = fetch_embeddings(corpus, provider)
    write_embeddings(matrix, args.embeddings)
    print(f"{matrix.n_rows}x{matrix.dim} embeddings -> {args.embeddings}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    matrix = read_embeddings(args.embeddings)
    grid = _grid_from_args(args)
    base = UmapParams(metric=args.metric, n_epochs=args.n_epochs)
    records = run_grid(matrix, grid, base=base, measure_time=args.timing,
                       progress=True, dbcv_space=args.dbcv_space)
    persist_records(records, args.records)
    scored = sum(1 for r in records if not r.failed)
    print(f"{len(records)} cells ({scored} scorable) -> {args.records}")
    return EXIT_OK


def _cmd_merge(args) -> int:
    merged = merge_records(*(load_records(p) for p in args.records))
    persist_records(merged, args.out)
    print(f"{len(merged)} records -> {args.out}")
    return EXIT_OK


def _cmd_select(args) -> int:
    records = load_records(args.records)
    record = select_top(records) if args.rule == "top" else select_diverse(records)
    if args.out:
        Path(args.out).write_text(
            json.dumps(json.loads(record.to_json()), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    print(record.to_json())
    return EXIT_OK


def _cmd_cluster(args) -> int:
    matrix = read_embeddings(args.embeddings)
    if args.params_from:
        cell = json.loads(Path(args.params_from).read_text(encoding="utf-8"))
        params = cell["params"]
        seed = cell["seed"]
    else:
        params = {
            "n_neighbors": args.n_neighbors, "min_dist": args.min_dist,
            "n_components": args.n_components, "min_samples": args.min_samples,
            "min_cluster_size": args.min_cluster_size,
            "selection_method": args.selection_method,
        }
        seed = args.seed
    uparams = UmapParams(
        n_neighbors=params["n_neighbors"], n_components=params["n_components"],
        min_dist=params["min_dist"], metric=args.metric,
        n_epochs=args.n_epochs, seed=seed,
    )
    projection = umap_reduce(matrix, uparams)
    labeling = hdbscan_cluster(projection.coords, HdbscanParams(
        min_cluster_size=params["min_cluster_size"],
        min_samples=params["min_samples"],
        cluster_selection_method=params["selection_method"],
    ))
    pipeline.write_labels_csv(list(matrix.ids), labeling, Path(args.labels))
    print(f"{labeling.n_clusters} clusters, {labeling.n_noise} noise -> {args.labels}")
    return EXIT_OK


def _load_aligned_tokens(corpus_path: str, labels_path: str):
    corpus = pipeline.read_corpus_jsonl(corpus_path)
    ids, labeling = pipeline.read_labels_csv(labels_path)
    if ids != corpus.ids:
        raise ConfigurationError("label file ids do not match the corpus")
    tokenized = tokenize_corpus(corpus, bundled_stopwords())
    return corpus, tokenized, labeling


def _cmd_topics(args) -> int:
    corpus, tokenized, labeling = _load_aligned_tokens(args.corpus, args.labels)
    classes = merge_cluster_docs(tokenized, labeling)
    if args.method == "keybert":
        if not (args.embeddings and args.provider_cmd):
            raise ConfigurationError("keybert needs --embeddings and --provider-cmd")
        matrix = read_embeddings(args.embeddings)
        if list(matrix.ids) != corpus.ids:
            raise ConfigurationError("embeddings do not align with the corpus")
        provider = ProviderSpec(args.provider_cmd, args.model)
        model = keybert_topics(classes, matrix, labeling, provider, args.candidates)
    else:
        model = ctfidf(classes, labeling)
    pipeline.write_topics_json(model, Path(args.out))
    print(f"{len(model.topics)} topics ({model.method}) -> {args.out}")
    return EXIT_OK


def _cmd_coherence(args) -> int:
    corpus = pipeline.read_corpus_jsonl(args.corpus)
    tokenized = tokenize_corpus(corpus, bundled_stopwords())
    model = pipeline.read_topics_json(args.topics)
    names = []
    for alias in args.metrics.split(","):
        alias = alias.strip()
        name = _METRIC_ALIASES.get(alias, alias)
        if name not in METRIC_NAMES:
            raise ConfigurationError(f"unknown metric {alias!r}")
        names.append(name)
    report = coherence_report(model, tokenized, n_words=args.top,
                              include_outlier=args.include_outlier, metrics=names)
    pipeline.write_coherence_json(report, Path(args.out))
    means = ", ".join(f"{k}={v:.4f}" for k, v in sorted(report.mean.items()))
    print(f"{means} -> {args.out}")
    return EXIT_OK


def _cmd_ctc(args) -> int:
    model = pipeline.read_topics_json(args.topics)
    if args.mock:
        transport = ReplayTransport(args.mock)
    elif args.endpoint and args.model:
        transport = HttpTransport(args.endpoint, args.model)
    else:
        raise ConfigurationError("ctc needs --mock or both --endpoint and --model")
    scores = ctc_report(model, transport, seed=args.seed,
                        include_outlier=args.include_outlier)
    Path(args.out).write_text(scores.to_json(), encoding="utf-8")
    print(f"intrusion={scores.intrusion} rating={scores.rating} -> {args.out}")
    return EXIT_OK


def _cmd_project(args) -> int:
    if not (len(args.embeddings) == len(args.labels) == len(args.nations)):
        raise ConfigurationError("--embeddings/--labels/--nations must align")
    matrices = [read_embeddings(p) for p in args.embeddings]
    labelings = []
    for path, matrix in zip(args.labels, matrices):
        ids, labeling = pipeline.read_labels_csv(path)
        if ids != list(matrix.ids):
            raise ConfigurationError(f"{path}: ids do not match embeddings")
        labelings.append(labeling.labels)
    pipeline.export_projection(
        matrices, labelings, args.nations, args.seed, Path(args.out),
        n_neighbors=args.n_neighbors, min_dist=args.min_dist,
        metric=args.metric, n_epochs=args.n_epochs,
    )
    total = sum(m.n_rows for m in matrices)
    print(f"{total} points -> {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise ConfigurationError(f"no manifest.json under {run_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    print(f"run: {run_dir}  (tool {manifest['tool']} {manifest['version']}, "
          f"seed {manifest['seed']})")
    for rule in ("top", "diverse"):
        selected = run_dir / f"selected_{rule}.json"
        if not selected.exists():
            continue
        record = json.loads(selected.read_text(encoding="utf-8"))
        print(f"\n[{rule}] dbcv={record['dbcv']:.4f} "
              f"clusters={record['n_clusters']}"
              f"{' (outlier)' if record['has_outlier'] else ''} "
              f"params={record['params']}")
        topics_path = run_dir / rule / "topics.json"
        if topics_path.exists():
            model = pipeline.read_topics_json(topics_path)
            for cid in model.topic_ids():
                words = ", ".join(w for w, _ in model.topics[cid][:10])
                size = model.cluster_sizes.get(cid, 0)
                print(f"  topic {cid:>3} ({size} docs): {words}")
        coh_path = run_dir / rule / "coherence.json"
        if coh_path.exists():
            coh = json.loads(coh_path.read_text(encoding="utf-8"))
            means = ", ".join(f"{k}={v:.4f}" for k, v in sorted(coh["mean"].items()))
            print(f"  coherence means: {means}")
        ctc_path = run_dir / rule / "ctc.json"
        if ctc_path.exists():
            scores = json.loads(ctc_path.read_text(encoding="utf-8"))
            print(f"  ctc: intrusion={scores['intrusion']} rating={scores['rating']}")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "ingest": _cmd_ingest,
    "preprocess": _cmd_preprocess,
    "embed": _cmd_embed,
    "sweep": _cmd_sweep,
    "merge": _cmd_merge,
    "select": _cmd_select,
    "cluster": _cmd_cluster,
    "topics": _cmd_topics,
    "coherence": _cmd_coherence,
    "ctc": _cmd_ctc,
    "project": _cmd_project,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except TopiclabError as exc:
        log.error("stage failed: %s", exc)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
