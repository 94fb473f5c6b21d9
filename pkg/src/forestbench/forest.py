"""Ensembles: train trees on independent bootstrap/subsample draws, keep the
per-tree in-bag/OOB bookkeeping, aggregate predictions, and score OOB loss."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from .data import REGRESSION, Dataset, SampleSplit, draw_sample
from .errors import ConfigurationError, OutOfBagError
from .rng import Rng
from .tree import Tree, TreeParams, grow_tree, predict, tree_from_dict, tree_to_dict

OOB_REQUIRED_MESSAGE = "MDA/OOB estimators require out-of-bag samples"


@dataclass(frozen=True)
class Sampling:
    """Per-tree row sampling: bootstrap (with replacement) or a subsample of
    a fixed fraction (without replacement)."""

    mode: str = "bootstrap"
    fraction: float | None = None

    def __post_init__(self):
        if self.mode == "bootstrap":
            if self.fraction is not None:
                raise ConfigurationError("bootstrap sampling takes no fraction")
        elif self.mode == "subsample":
            if self.fraction is None or not 0.0 < self.fraction <= 1.0:
                raise ConfigurationError("subsample fraction must lie in (0, 1]")
        else:
            raise ConfigurationError(f"unknown sampling mode {self.mode!r}")

    @staticmethod
    def parse(text: str) -> "Sampling":
        """Accept 'bootstrap' or 'subsample:<fraction>'."""
        if text == "bootstrap":
            return Sampling()
        if text.startswith("subsample:"):
            try:
                return Sampling("subsample", float(text.split(":", 1)[1]))
            except ValueError:
                raise ConfigurationError(f"bad subsample fraction in {text!r}") from None
        raise ConfigurationError(f"unknown sampling spec {text!r}")

    def to_string(self) -> str:
        return "bootstrap" if self.mode == "bootstrap" else f"subsample:{self.fraction!r}"


@dataclass(frozen=True)
class ForestParams:
    n_trees: int
    tree: TreeParams
    sampling: Sampling = Sampling()
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigurationError("n_trees must be >= 1")


@dataclass(frozen=True, eq=False)
class Forest:
    """Trained trees paired with their sampling splits, plus a fingerprint of
    the training data so estimators can refuse mismatched datasets."""

    trees: tuple[tuple[Tree, SampleSplit], ...]
    params: ForestParams
    n: int
    p: int
    task: str
    n_classes: int | None
    fingerprint: str

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def check_dataset(self, dataset: Dataset) -> None:
        if dataset.fingerprint() != self.fingerprint:
            raise ConfigurationError(
                "dataset fingerprint does not match the forest's training data"
            )


def _train_one(dataset: Dataset, params: ForestParams, index: int) -> tuple[Tree, SampleSplit]:
    # Per-tree stream derives only from (seed, index), so scheduling and
    # worker count cannot affect the result.
    rng = Rng(params.seed).split(index)
    sample = draw_sample(
        dataset.n, params.sampling.mode, rng.split(0), params.sampling.fraction
    )
    tree = grow_tree(dataset, sample, params.tree, rng.split(1))
    return tree, sample


def train_forest(dataset: Dataset, params: ForestParams, workers: int = 1) -> Forest:
    """Train ``params.n_trees`` trees on independent draws.

    ``workers`` > 1 trains trees in separate processes; results are gathered
    by tree index and are identical for any worker count.
    """
    if params.tree.task != dataset.task:
        raise ConfigurationError(
            f"tree params are for {params.tree.task}, dataset is {dataset.task}"
        )
    mtry = params.tree.mtry
    if mtry is not None and mtry > dataset.p:
        raise ConfigurationError(f"mtry={mtry} exceeds p={dataset.p}")
    indices = range(params.n_trees)
    if workers > 1 and params.n_trees > 1:
        task = partial(_train_one, dataset, params)
        chunk = max(1, params.n_trees // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trained = list(pool.map(task, indices, chunksize=chunk))
    else:
        trained = [_train_one(dataset, params, i) for i in indices]
    return Forest(
        trees=tuple(trained),
        params=params,
        n=dataset.n,
        p=dataset.p,
        task=dataset.task,
        n_classes=dataset.n_classes,
        fingerprint=dataset.fingerprint(),
    )


def forest_predict(forest: Forest, x) -> float | np.ndarray:
    """Unweighted mean of tree predictions (probability vectors averaged
    coordinate-wise in classification)."""
    preds = [predict(tree, x) for tree, _ in forest.trees]
    if forest.task == REGRESSION:
        return float(np.mean(preds))
    return np.mean(np.vstack(preds), axis=0)


def _tree_oob_loss(tree: Tree, dataset: Dataset, oob: np.ndarray,
                   permuted: tuple[int, np.ndarray] | None) -> float:
    X = dataset.features[oob]
    if permuted is not None:
        feature, order = permuted
        X = X.copy()
        X[:, feature] = X[order, feature]
    leaves = tree.arrays.route(X, np.arange(oob.size))
    means = tree.arrays.mean[leaves]
    if dataset.task == REGRESSION:
        residual = means[:, 0] - dataset.response[oob]
        return float(np.mean(residual * residual))
    predicted = np.argmax(means, axis=1)
    return float(np.mean(predicted != dataset.response[oob]))


def oob_loss(
    forest: Forest,
    dataset: Dataset,
    feature_permutation: tuple[int, list[np.ndarray | None]] | None = None,
) -> np.ndarray:
    """Per-tree loss on each tree's own OOB rows: MSE for regression,
    misclassification rate for classification.

    ``feature_permutation`` is (feature, per-tree position permutations); the
    named column is permuted within each tree's OOB rows before routing.
    Trees with no OOB rows are flagged with NaN; if every tree is empty this
    raises OutOfBagError.
    """
    forest.check_dataset(dataset)
    losses = np.full(forest.n_trees, np.nan)
    for t, (tree, sample) in enumerate(forest.trees):
        if sample.oob.size == 0:
            continue
        permuted = None
        if feature_permutation is not None:
            feature, orders = feature_permutation
            order = orders[t]
            if order is None:
                order = np.arange(sample.oob.size)
            permuted = (feature, np.asarray(order))
        losses[t] = _tree_oob_loss(tree, dataset, sample.oob, permuted)
    if np.all(np.isnan(losses)):
        raise OutOfBagError(OOB_REQUIRED_MESSAGE)
    return losses


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def forest_to_dict(forest: Forest) -> dict:
    return {
        "schema_version": 1,
        "kind": "forest",
        "n": forest.n,
        "p": forest.p,
        "task": forest.task,
        "n_classes": forest.n_classes,
        "fingerprint": forest.fingerprint,
        "params": {
            "n_trees": forest.params.n_trees,
            "seed": forest.params.seed,
            "sampling": forest.params.sampling.to_string(),
            "min_leaf": forest.params.tree.min_leaf,
            "max_depth": forest.params.tree.max_depth,
            "mtry": forest.params.tree.mtry,
            "allow_zero_gain_splits": forest.params.tree.allow_zero_gain_splits,
        },
        "trees": [
            {"inbag": [int(c) for c in sample.inbag], "tree": tree_to_dict(tree)}
            for tree, sample in forest.trees
        ],
    }


def forest_from_dict(doc: dict) -> Forest:
    if doc.get("kind") != "forest":
        raise ConfigurationError("document is not a serialized forest")
    p = doc["params"]
    tree_params = TreeParams(
        min_leaf=p["min_leaf"],
        max_depth=p["max_depth"],
        mtry=p["mtry"],
        task=doc["task"],
        n_classes=doc["n_classes"],
        allow_zero_gain_splits=p["allow_zero_gain_splits"],
    )
    params = ForestParams(
        n_trees=p["n_trees"],
        tree=tree_params,
        sampling=Sampling.parse(p["sampling"]),
        seed=p["seed"],
    )
    trees = tuple(
        (tree_from_dict(entry["tree"]), SampleSplit(inbag=np.array(entry["inbag"])))
        for entry in doc["trees"]
    )
    return Forest(
        trees=trees,
        params=params,
        n=doc["n"],
        p=doc["p"],
        task=doc["task"],
        n_classes=doc["n_classes"],
        fingerprint=doc["fingerprint"],
    )


def save_forest(forest: Forest, path) -> None:
    Path(path).write_text(
        json.dumps(forest_to_dict(forest), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_forest(path) -> Forest:
    return forest_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
