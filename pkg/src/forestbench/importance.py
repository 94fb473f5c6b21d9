"""Feature-importance estimators over trained forests.

The classic impurity-based score (MDI) sums sample-fraction-weighted impurity
decreases per split feature.  The same quantity can be written as a sample
covariance between the response and each feature's prediction contribution,
which is what makes an out-of-bag evaluation (MDI-oob) possible.  The naive
OOB variant recomputes impurity decreases node-by-node from OOB samples, and
permutation importance (MDA) measures OOB loss inflation after scrambling a
column.  Split counts are kept as a structural baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, SampleSplit, response_matrix
from .errors import ConfigurationError, OutOfBagError
from .forest import OOB_REQUIRED_MESSAGE, Forest, oob_loss
from .rng import Rng
from .tree import Tree, contribution_totals

METHOD_NAMES = ("mdi", "mdi-oob", "naive-oob", "mda", "split-count", "mdi-covariance-inbag")


@dataclass
class ImportanceVector:
    """Per-feature scores tagged with the estimator and run metadata."""

    method: str
    scores: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if not np.all(np.isfinite(self.scores)):
            raise ConfigurationError("importance scores must be finite")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "scores": [float(v) for v in self.scores],
            "metadata": self.metadata,
        }


def _check_tree(tree: Tree, dataset: Dataset) -> None:
    if tree.fingerprint != dataset.fingerprint():
        raise ConfigurationError(
            "dataset fingerprint does not match the tree's training data"
        )


def mdi_classic(tree: Tree, dataset: Dataset, sample: SampleSplit) -> np.ndarray:
    """Per-feature sum of (weighted node fraction) * (impurity decrease) over
    the tree's inner nodes, normalized by the weighted in-bag total."""
    _check_tree(tree, dataset)
    if sample.total_weight != tree.root.n_samples:
        raise ConfigurationError("sample does not match the tree's in-bag total")
    arrays = tree.arrays
    scores = np.zeros(tree.n_features)
    inner = arrays.feature >= 0
    if inner.any():
        weight = arrays.n_weighted[inner] / tree.root.n_samples
        np.add.at(scores, arrays.feature[inner], weight * arrays.gain[inner])
    return scores


def mdi_covariance(tree: Tree, dataset: Dataset, rows, weights=None) -> np.ndarray:
    """Covariance form of MDI over the supplied rows: the weighted mean of
    <contribution of feature k at x_i, y_i> (one-hot y in classification).

    On the in-bag rows with bootstrap multiplicities this reproduces
    :func:`mdi_classic` exactly.
    """
    _check_tree(tree, dataset)
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise ConfigurationError("mdi_covariance needs at least one row")
    w = np.ones(rows.size) if weights is None else np.asarray(weights, dtype=np.float64)
    values = w[:, None] * response_matrix(dataset)[rows]
    return contribution_totals(tree, dataset.features, rows, values) / w.sum()


def _oob_mean(forest: Forest, per_tree) -> tuple[np.ndarray, int]:
    """Average per-tree scores over trees with OOB rows; skipped count."""
    totals = np.zeros(forest.p)
    used = 0
    for tree, sample in forest.trees:
        if sample.oob.size == 0:
            continue
        totals += per_tree(tree, sample)
        used += 1
    if used == 0:
        raise OutOfBagError(OOB_REQUIRED_MESSAGE)
    return totals / used, forest.n_trees - used


def mdi_oob(forest: Forest, dataset: Dataset) -> ImportanceVector:
    """Covariance-form MDI evaluated on each tree's own out-of-bag rows,
    averaged over contributing trees."""
    forest.check_dataset(dataset)

    def per_tree(tree, sample):
        return mdi_covariance(tree, dataset, sample.oob)

    scores, skipped = _oob_mean(forest, per_tree)
    return ImportanceVector("mdi-oob", scores, _metadata(forest, skipped))


def naive_oob(forest: Forest, dataset: Dataset) -> ImportanceVector:
    """Impurity decreases recomputed at every inner node from the OOB rows
    routed through it; nodes with an empty OOB child contribute zero."""
    forest.check_dataset(dataset)
    matrix = response_matrix(dataset)

    def per_tree(tree: Tree, sample: SampleSplit):
        arrays = tree.arrays
        oob = sample.oob
        leaves = arrays.route(dataset.features, oob)
        stacked = np.hstack([np.ones((oob.size, 1)), matrix[oob]])
        totals = arrays.aggregate(leaves, stacked)
        counts = totals[:, 0]
        sums = totals[:, 1:]
        scores = np.zeros(tree.n_features)
        inner = arrays.feature >= 0
        left, right = arrays.left[inner], arrays.right[inner]
        ok = (counts[left] > 0) & (counts[right] > 0)
        if ok.any():
            li, ri = left[ok], right[ok]
            ti = np.flatnonzero(inner)[ok]
            mean_l = sums[li] / counts[li][:, None]
            mean_r = sums[ri] / counts[ri][:, None]
            diff = mean_l - mean_r
            decrease = (
                counts[li] * counts[ri] / (counts[ti] * counts[ti])
                * np.einsum("nd,nd->n", diff, diff)
            )
            np.add.at(scores, arrays.feature[ti], counts[ti] / oob.size * decrease)
        return scores

    scores, skipped = _oob_mean(forest, per_tree)
    return ImportanceVector("naive-oob", scores, _metadata(forest, skipped))


def mda(forest: Forest, dataset: Dataset, n_repeats: int = 1, rng: Rng | None = None) -> ImportanceVector:
    """Permutation importance: mean over trees of (OOB loss after permuting a
    feature within the tree's OOB rows) minus (baseline OOB loss)."""
    if rng is None:
        raise ConfigurationError("mda needs an Rng for the permutations")
    if n_repeats < 1:
        raise ConfigurationError("n_repeats must be >= 1")
    baseline = oob_loss(forest, dataset)
    valid = ~np.isnan(baseline)
    scores = np.zeros(forest.p)
    for k in range(forest.p):
        repeat_losses = np.zeros((n_repeats, forest.n_trees))
        for r in range(n_repeats):
            orders: list[np.ndarray | None] = []
            for t, (_, sample) in enumerate(forest.trees):
                if sample.oob.size == 0:
                    orders.append(None)
                else:
                    orders.append(rng.split(t).split(k).split(r).permutation(sample.oob.size))
            repeat_losses[r] = oob_loss(forest, dataset, feature_permutation=(k, orders))
        scores[k] = float(np.mean(repeat_losses.mean(axis=0)[valid] - baseline[valid]))
    return ImportanceVector(
        "mda", scores, _metadata(forest, int((~valid).sum()), n_repeats=n_repeats)
    )


def split_count(forest: Forest) -> ImportanceVector:
    """Number of inner nodes splitting on each feature, per tree."""
    scores = np.zeros(forest.p)
    for tree, _ in forest.trees:
        arrays = tree.arrays
        inner = arrays.feature >= 0
        np.add.at(scores, arrays.feature[inner], 1.0)
    return ImportanceVector(
        "split-count", scores / forest.n_trees, _metadata(forest, 0)
    )


def noise_mass(scores, relevant) -> float | np.ndarray:
    """Total importance assigned to features outside ``relevant`` — the bias
    statistic tracked by the sweeps.

    Accepts an ImportanceVector, a (p,) score vector, or a (T, p) matrix of
    per-tree scores (returning one mass per tree).
    """
    if isinstance(scores, ImportanceVector):
        scores = scores.scores
    scores = np.asarray(scores, dtype=np.float64)
    p = scores.shape[-1]
    relevant = frozenset(int(k) for k in relevant)
    if any(k < 0 or k >= p for k in relevant):
        raise ConfigurationError("relevant indices out of range")
    noisy = sorted(frozenset(range(p)) - relevant)
    masses = scores[..., noisy].sum(axis=-1)
    return float(masses) if masses.ndim == 0 else masses


def _metadata(forest: Forest, skipped: int, **extra) -> dict:
    meta = {
        "n_trees": forest.params.n_trees,
        "seed": forest.params.seed,
        "sampling": forest.params.sampling.to_string(),
        "min_leaf": forest.params.tree.min_leaf,
        "max_depth": forest.params.tree.max_depth,
        "mtry": forest.params.tree.mtry,
        "skipped_trees": skipped,
    }
    meta.update(extra)
    return meta


def forest_mdi(forest: Forest, dataset: Dataset) -> ImportanceVector:
    """Classic MDI averaged over the forest's trees."""
    forest.check_dataset(dataset)
    scores = np.zeros(forest.p)
    for tree, sample in forest.trees:
        scores += mdi_classic(tree, dataset, sample)
    return ImportanceVector("mdi", scores / forest.n_trees, _metadata(forest, 0))


def forest_mdi_covariance_inbag(forest: Forest, dataset: Dataset) -> ImportanceVector:
    """Covariance form evaluated on the in-bag rows (a cross-check that must
    reproduce classic MDI)."""
    forest.check_dataset(dataset)
    scores = np.zeros(forest.p)
    for tree, sample in forest.trees:
        rows = np.flatnonzero(sample.inbag > 0)
        scores += mdi_covariance(tree, dataset, rows, weights=sample.inbag[rows])
    return ImportanceVector(
        "mdi-covariance-inbag", scores / forest.n_trees, _metadata(forest, 0)
    )


def compute_importance(
    method: str,
    forest: Forest,
    dataset: Dataset,
    rng: Rng | None = None,
    n_repeats: int = 1,
) -> ImportanceVector:
    """Evaluate one estimator by name (see METHOD_NAMES)."""
    if method == "mdi":
        return forest_mdi(forest, dataset)
    if method == "mdi-oob":
        return mdi_oob(forest, dataset)
    if method == "naive-oob":
        return naive_oob(forest, dataset)
    if method == "mda":
        return mda(forest, dataset, n_repeats=n_repeats, rng=rng)
    if method == "split-count":
        return split_count(forest)
    if method == "mdi-covariance-inbag":
        return forest_mdi_covariance_inbag(forest, dataset)
    raise ConfigurationError(f"unknown importance method {method!r}")
