#!/usr/bin/env python3
"""Generate a synthetic multi-topic corpus and run the whole pipeline on it.

Writes the corpus, a pipeline config, and all run artifacts under --workdir,
then prints the extracted topics.  Uses the bundled hash provider, so it
runs offline in a few seconds.

    python scripts/synthetic_demo.py --workdir /tmp/demo
"""
import argparse
import csv
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from conftest import synthetic_topic_corpus  # noqa: E402

from topiclab.cli import main as topiclab_main  # noqa: E402


def build_workdir(workdir: Path, seed: int, docs_per_topic: int) -> Path:
    workdir.mkdir(parents=True, exist_ok=True)
    rows = synthetic_topic_corpus(seed, docs_per_topic=docs_per_topic)
    corpus = workdir / "corpus.csv"
    with corpus.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id", "text", "country", "language", "label"])
        writer.writeheader()
        for r in rows:
            writer.writerow({k: r[k] for k in writer.fieldnames})
    config = workdir / "pipeline.toml"
    config.write_text(f'''
seed = {seed}

[corpus]
path = "{corpus}"
format = "csv"

[provider]
command = "{sys.executable} -m topiclab.mock_provider"
model = "hash-64"

[grid]
n_neighbors = [10, 15]
min_dist = [0.0, 0.09]
n_components = [2]
min_samples = [3]
min_cluster_size = [8, 12]

[umap]
metric = "cosine"
n_epochs = 150

[topics]
method = "ctfidf"
top = 10

[coherence]
metrics = ["c_v", "u_mass", "c_uci", "c_npmi"]
top = 10
''', encoding="utf-8")
    return config


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", required=True)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--docs-per-topic", type=int, default=30)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    config = build_workdir(workdir, args.seed, args.docs_per_topic)
    out_dir = workdir / "run"
    code = topiclab_main(["run", "--config", str(config), "--out-dir", str(out_dir)])
    if code != 0:
        return code
    return topiclab_main(["report", "--run-dir", str(out_dir)])


if __name__ == "__main__":
    sys.exit(main())
