"""Noisy-feature identification scoring (AUC), the replicated benchmark
runner, and report emission/parsing."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigurationError
from .forest import ForestParams, train_forest
from .generators import GeneratorSpec
from .importance import METHOD_NAMES, ImportanceVector, compute_importance
from .rng import Rng

# Label stream reserved for pinning a relevant set across replicates.
_RELEVANT_SET_LABEL = 910_461_001


def auc(scores, labels) -> float:
    """Probability that a random label-1 feature outscores a random label-0
    feature, ties half-credited (Mann-Whitney with average ranks)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ConfigurationError("scores and labels must be matching 1-d arrays")
    if not np.all((labels == 0) | (labels == 1)):
        raise ConfigurationError("labels must be 0/1 indicators")
    n1 = int(labels.sum())
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        raise ConfigurationError("AUC needs at least one feature of each label")
    ranks = rankdata(scores)
    u = ranks[labels == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative benchmark: generator, forest, estimators, replication."""

    generator: GeneratorSpec
    forest: ForestParams
    methods: tuple[str, ...]
    replicates: int
    seed: int
    n_repeats: int = 1
    fixed_relevant_set: bool = False
    workers: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigurationError("replicates must be >= 1")
        if not self.methods:
            raise ConfigurationError("methods must be non-empty")
        unknown = [m for m in self.methods if m not in METHOD_NAMES]
        if unknown:
            raise ConfigurationError(f"unknown methods: {unknown}")
        object.__setattr__(self, "methods", tuple(self.methods))


@dataclass
class ReplicateResults:
    """Per-replicate importance vectors and AUCs, with per-method summary."""

    methods: tuple[str, ...]
    seed: int
    replicates: int
    auc_matrix: np.ndarray  # (replicates, methods)
    importances: list[list[ImportanceVector]] = field(repr=False)
    relevant_sets: list[list[int]]
    single_replicate: bool = False

    def mean_auc(self) -> np.ndarray:
        return self.auc_matrix.mean(axis=0)

    def stderr_auc(self) -> np.ndarray:
        if self.replicates < 2:
            return np.zeros(len(self.methods))
        return self.auc_matrix.std(axis=0, ddof=1) / np.sqrt(self.replicates)

    def method_auc(self, method: str) -> float:
        return float(self.mean_auc()[self.methods.index(method)])

    def to_dict(self) -> dict:
        means = self.mean_auc()
        errors = self.stderr_auc()
        return {
            "schema_version": 1,
            "kind": "replicate_results",
            "methods": list(self.methods),
            "seed": self.seed,
            "replicates": self.replicates,
            "single_replicate": self.single_replicate,
            "auc": [[float(v) for v in row] for row in self.auc_matrix],
            "summary": {
                method: {"mean_auc": float(means[j]), "stderr": float(errors[j])}
                for j, method in enumerate(self.methods)
            },
            "relevant_sets": [list(map(int, s)) for s in self.relevant_sets],
            "importances": [
                [vector.to_dict() for vector in per_replicate]
                for per_replicate in self.importances
            ],
        }


def results_from_dict(doc: dict) -> ReplicateResults:
    if doc.get("kind") != "replicate_results":
        raise ConfigurationError("document is not a serialized results set")
    importances = [
        [
            ImportanceVector(entry["method"], np.array(entry["scores"]), entry["metadata"])
            for entry in per_replicate
        ]
        for per_replicate in doc["importances"]
    ]
    return ReplicateResults(
        methods=tuple(doc["methods"]),
        seed=doc["seed"],
        replicates=doc["replicates"],
        auc_matrix=np.array(doc["auc"], dtype=np.float64),
        importances=importances,
        relevant_sets=[list(s) for s in doc["relevant_sets"]],
        single_replicate=doc["single_replicate"],
    )


def _pinned_generator(config: ExperimentConfig) -> GeneratorSpec:
    """Resolve the fixed-relevant-set option by drawing the set once and
    baking it into the generator parameters."""
    if not config.fixed_relevant_set:
        return config.generator
    params = dict(config.generator.params)
    if "relevant" in params and params["relevant"] is not None:
        return config.generator
    name = config.generator.name
    if name == "strobl":
        return config.generator  # relevant set is structural
    if name == "pure-noise":
        return config.generator
    rng = Rng(config.seed).split(_RELEVANT_SET_LABEL)
    if name == "discrete-grid":
        pool = min(10, params["p"])
    else:
        pool = params["p"]
    count = params.get("n_relevant", 5)
    chosen = sorted(int(k) for k in rng.choice(pool, size=count, replace=False))
    params["relevant"] = tuple(chosen)
    return GeneratorSpec(name, params)


def _run_replicate(generator: GeneratorSpec, forest_params: ForestParams,
                   methods: tuple[str, ...], seed: int, n_repeats: int, replicate: int):
    rng = Rng(seed).split(replicate)
    dataset = generator.sample(rng.split(0))
    forest = train_forest(dataset, replace(forest_params, seed=rng.derive_seed(1)))
    labels = np.zeros(dataset.p, dtype=np.int64)
    labels[sorted(dataset.relevant_set)] = 1
    vectors = []
    scores = []
    for j, method in enumerate(methods):
        vector = compute_importance(
            method, forest, dataset, rng=rng.split(2).split(j), n_repeats=n_repeats
        )
        vectors.append(vector)
        scores.append(auc(vector.scores, labels))
    return replicate, scores, vectors, sorted(dataset.relevant_set)


def run_experiment(config: ExperimentConfig) -> ReplicateResults:
    """Run every replicate: fresh dataset, one shared forest, every estimator
    evaluated on it, AUC against the known relevant set."""
    generator = _pinned_generator(config)
    run = partial(
        _run_replicate, generator, config.forest, config.methods, config.seed,
        config.n_repeats,
    )
    replicates = range(config.replicates)
    if config.workers > 1 and config.replicates > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outputs = list(pool.map(run, replicates))
    else:
        outputs = [run(r) for r in replicates]
    outputs.sort(key=lambda item: item[0])
    auc_matrix = np.array([row for _, row, _, _ in outputs], dtype=np.float64)
    return ReplicateResults(
        methods=config.methods,
        seed=config.seed,
        replicates=config.replicates,
        auc_matrix=auc_matrix,
        importances=[vectors for _, _, vectors, _ in outputs],
        relevant_sets=[rel for _, _, _, rel in outputs],
        single_replicate=config.replicates == 1,
    )


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def write_report(results: ReplicateResults, path, format: str = "csv") -> None:
    """CSV: one detail row per (method, replicate) plus one summary row per
    method.  JSON: the full nested results document."""
    path = Path(path)
    try:
        if format == "json":
            path.write_text(
                json.dumps(results.to_dict(), indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
        elif format == "csv":
            means = results.mean_auc()
            errors = results.stderr_auc()
            with path.open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(
                    ["record", "method", "replicate", "auc", "mean_auc", "stderr",
                     "schema_version"]
                )
                for j, method in enumerate(results.methods):
                    for r in range(results.replicates):
                        writer.writerow(
                            ["replicate", method, r,
                             repr(float(results.auc_matrix[r, j])), "", "", 1]
                        )
                for j, method in enumerate(results.methods):
                    writer.writerow(
                        ["summary", method, "", "", repr(float(means[j])),
                         repr(float(errors[j])), 1]
                    )
        else:
            raise ConfigurationError(f"unknown report format {format!r}")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_report(path, format: str = "csv"):
    """Parse a written report back: JSON returns ReplicateResults; CSV returns
    (detail rows, summary rows) as lists of dicts."""
    path = Path(path)
    if format == "json":
        return results_from_dict(json.loads(path.read_text(encoding="utf-8")))
    detail, summary = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["record"] == "replicate":
                detail.append(
                    {"method": row["method"], "replicate": int(row["replicate"]),
                     "auc": float(row["auc"])}
                )
            else:
                summary.append(
                    {"method": row["method"], "mean_auc": float(row["mean_auc"]),
                     "stderr": float(row["stderr"])}
                )
    return detail, summary
