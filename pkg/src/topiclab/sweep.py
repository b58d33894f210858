"""Grid search over reducer x clusterer hyperparameters, scored by DBCV.

Each grid cell gets a seed hashed from its own parameter values, so
enlarging the grid never changes existing cells.  Unscorable cells are
first-class records with a failure reason, not dropped rows.
"""
from __future__ import annotations

import itertools
import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dbcv import dbcv_score
from .embedding_io import EmbeddingMatrix
from .errors import (
    EmptySelectionError,
    NotScorableError,
    ParameterError,
    TopiclabError,
)
from .hdbscan import HdbscanParams, Labeling, hdbscan_cluster
from .rng import derive_seed
from .umap import UmapParams, umap_reduce

log = logging.getLogger(__name__)

# Grid defaults mirror the hyperparameter values exercised in the
# reference evaluation tables.
DEFAULT_N_NEIGHBORS = (5, 20, 50, 100, 200)
DEFAULT_MIN_DIST = (0.0, 0.09)
DEFAULT_N_COMPONENTS = (2, 20, 100, 200)
DEFAULT_MIN_SAMPLES = (5, 10)
DEFAULT_MIN_CLUSTER_SIZE = (10, 15, 20, 30)
DEFAULT_METHODS = ("eom",)


@dataclass(frozen=True)
class GridSpec:
    n_neighbors: tuple[int, ...] = DEFAULT_N_NEIGHBORS
    min_dist: tuple[float, ...] = DEFAULT_MIN_DIST
    n_components: tuple[int, ...] = DEFAULT_N_COMPONENTS
    min_samples: tuple[int, ...] = DEFAULT_MIN_SAMPLES
    min_cluster_size: tuple[int, ...] = DEFAULT_MIN_CLUSTER_SIZE
    selection_methods: tuple[str, ...] = DEFAULT_METHODS
    seed: int = 0

    def __post_init__(self):
        for name in ("n_neighbors", "min_dist", "n_components", "min_samples",
                     "min_cluster_size", "selection_methods"):
            value = getattr(self, name)
            if not value:
                raise ParameterError(f"grid list {name} must be non-empty")
            object.__setattr__(self, name, tuple(value))

    def cells(self) -> list[dict]:
        out = []
        for nn, md, nc, ms, mcs, method in itertools.product(
            self.n_neighbors, self.min_dist, self.n_components,
            self.min_samples, self.min_cluster_size, self.selection_methods,
        ):
            out.append({
                "n_neighbors": int(nn),
                "min_dist": float(md),
                "n_components": int(nc),
                "min_samples": int(ms),
                "min_cluster_size": int(mcs),
                "selection_method": str(method),
            })
        return out


PARAM_KEYS = ("n_neighbors", "min_dist", "n_components", "min_samples",
              "min_cluster_size", "selection_method")


def params_key(params: dict) -> tuple:
    return tuple(params[k] for k in PARAM_KEYS)


@dataclass(frozen=True)
class RunRecord:
    """One sweep cell: hyperparameters, DBCV (or a failure reason), census."""

    params: dict
    dbcv: float | None
    n_clusters: int
    has_outlier: bool
    n_noise: int
    seed: int
    elapsed_ms: int = 0
    failed_reason: str | None = None

    @property
    def failed(self) -> bool:
        return self.dbcv is None

    def to_json(self) -> str:
        payload = asdict(self)
        payload["params"] = {k: self.params[k] for k in PARAM_KEYS}
        return json.dumps(payload, sort_keys=True)

    @staticmethod
    def from_json(line: str) -> "RunRecord":
        data = json.loads(line)
        return RunRecord(
            params=dict(data["params"]),
            dbcv=data["dbcv"],
            n_clusters=data["n_clusters"],
            has_outlier=data["has_outlier"],
            n_noise=data["n_noise"],
            seed=data["seed"],
            elapsed_ms=data.get("elapsed_ms", 0),
            failed_reason=data.get("failed_reason"),
        )


def cell_seed(grid_seed: int, params: dict) -> int:
    return derive_seed(grid_seed, *(f"{k}={params[k]!r}" for k in PARAM_KEYS))


def evaluate_cell(
    X: EmbeddingMatrix | np.ndarray,
    params: dict,
    seed: int,
    base: UmapParams | None = None,
    measure_time: bool = False,
    dbcv_space: str = "reduced",
) -> tuple[RunRecord, Labeling | None]:
    """UMAP -> HDBSCAN -> DBCV for one parameter combination.

    DBCV is scored in the reduced space by default; dbcv_space="original"
    scores the same labeling against the input embedding space instead.
    """
    base = base or UmapParams()
    start = time.perf_counter()
    labeling: Labeling | None = None
    try:
        uparams = UmapParams(
            n_neighbors=params["n_neighbors"],
            n_components=params["n_components"],
            min_dist=params["min_dist"],
            metric=base.metric,
            spread=base.spread,
            n_epochs=base.n_epochs,
            negative_sample_rate=base.negative_sample_rate,
            initial_lr=base.initial_lr,
            seed=seed,
        )
        projection = umap_reduce(X, uparams)
        hparams = HdbscanParams(
            min_cluster_size=params["min_cluster_size"],
            min_samples=params["min_samples"],
            cluster_selection_method=params["selection_method"],
        )
        labeling = hdbscan_cluster(projection.coords, hparams)
        if dbcv_space == "original":
            original = X.values if isinstance(X, EmbeddingMatrix) else X
            report = dbcv_score(original, labeling)
        else:
            report = dbcv_score(projection.coords, labeling, dim=params["n_components"])
        record = RunRecord(
            params=params,
            dbcv=report.score,
            n_clusters=labeling.n_clusters,
            has_outlier=labeling.n_noise > 0,
            n_noise=labeling.n_noise,
            seed=seed,
        )
    except (ParameterError, NotScorableError) as exc:
        n_clusters = labeling.n_clusters if labeling is not None else 0
        n_noise = labeling.n_noise if labeling is not None else 0
        record = RunRecord(
            params=params,
            dbcv=None,
            n_clusters=n_clusters,
            has_outlier=n_noise > 0,
            n_noise=n_noise,
            seed=seed,
            failed_reason=str(exc),
        )
    if measure_time:
        elapsed = int(round((time.perf_counter() - start) * 1000))
        record = RunRecord(**{**asdict(record), "elapsed_ms": elapsed})
    return record, labeling


def run_grid(
    X: EmbeddingMatrix | np.ndarray,
    grid: GridSpec,
    base: UmapParams | None = None,
    measure_time: bool = False,
    progress: bool = False,
    dbcv_space: str = "reduced",
) -> list[RunRecord]:
    """Evaluate every Cartesian cell; failures become failed records."""
    records = []
    cells = grid.cells()
    for i, params in enumerate(cells):
        record, _ = evaluate_cell(
            X, params, cell_seed(grid.seed, params), base, measure_time, dbcv_space
        )
        records.append(record)
        if progress:
            log.info("cell %d/%d: dbcv=%s clusters=%d", i + 1, len(cells),
                     "failed" if record.failed else f"{record.dbcv:.3f}",
                     record.n_clusters)
    return records


def _tie_key(record: RunRecord) -> tuple:
    return (-record.dbcv, record.n_clusters, params_key(record.params))


def select_top(records: Sequence[RunRecord]) -> RunRecord:
    """Best DBCV overall; ties prefer fewer clusters, then lexicographic params."""
    scored = [r for r in records if not r.failed]
    if not scored:
        raise EmptySelectionError("no scorable sweep records")
    return min(scored, key=_tie_key)


def select_diverse(records: Sequence[RunRecord]) -> RunRecord:
    """Best DBCV among settings with at least 3 non-noise clusters.

    The top selection itself is excluded so this always names a second,
    more fragmented setting to inspect; it is only returned when no other
    qualifying record exists.
    """
    scored = [r for r in records if not r.failed]
    qualifying = [r for r in scored if r.n_clusters >= 3]
    if not qualifying:
        nearest = max((r.n_clusters for r in scored), default=0)
        raise EmptySelectionError(
            f"no record has >= 3 non-noise clusters (closest: {nearest})"
        )
    top = select_top(records)
    others = [r for r in qualifying if r is not top]
    return min(others, key=_tie_key) if others else qualifying[0]


def persist_records(records: Sequence[RunRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")


def load_records(path: str | Path) -> list[RunRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(RunRecord.from_json(line))
            except (json.JSONDecodeError, KeyError) as exc:
                raise TopiclabError(f"{path}:{lineno}: malformed record ({exc})")
    return records


def merge_records(*record_lists: Sequence[RunRecord]) -> list[RunRecord]:
    """Concatenate sweeps deterministically: sort by params, drop duplicates
    of the same (params, seed)."""
    seen = set()
    merged = []
    for records in record_lists:
        for record in records:
            key = (params_key(record.params), record.seed)
            if key not in seen:
                seen.add(key)
                merged.append(record)
    merged.sort(key=lambda r: (params_key(r.params), r.seed))
    return merged
