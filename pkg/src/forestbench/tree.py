"""Single CART tree: impurity math, exhaustive split search over random
feature subsets, recursive growth under leaf-size/depth constraints,
prediction, and the per-feature contribution decomposition of predictions.

All node statistics are weighted by bootstrap multiplicities.  Classification
runs on one-hot response rows, under which the summed per-coordinate variance
equals the Gini index, so both tasks share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .data import CLASSIFICATION, REGRESSION, Dataset, SampleSplit, one_hot, response_matrix
from .errors import ConfigurationError
from .rng import Rng


@dataclass(frozen=True)
class TreeParams:
    """Growth constraints: minimum weighted samples per leaf, optional depth
    cap, candidate features per node (None = all), and the task."""

    min_leaf: int = 1
    max_depth: int | None = None
    mtry: int | None = None
    task: str = REGRESSION
    n_classes: int | None = None
    allow_zero_gain_splits: bool = False

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ConfigurationError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigurationError("max_depth must be >= 1 (or None for unlimited)")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigurationError("mtry must be >= 1 (or None for all features)")
        if self.task not in (REGRESSION, CLASSIFICATION):
            raise ConfigurationError(f"unknown task {self.task!r}")
        if self.task == CLASSIFICATION and (self.n_classes is None or self.n_classes < 2):
            raise ConfigurationError("classification trees need n_classes >= 2")
        if self.task == REGRESSION and self.n_classes is not None:
            raise ConfigurationError("regression trees carry no class count")


@dataclass(frozen=True, eq=False)
class Node:
    """Arena entry.  Leaves have feature == -1; inner nodes carry the split
    (feature, threshold), child ids, and the impurity decrease of the split."""

    id: int
    depth: int
    n_samples: int
    mean: np.ndarray
    feature: int = -1
    threshold: float = float("nan")
    left: int = -1
    right: int = -1
    gain: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass(frozen=True, eq=False)
class Tree:
    """Immutable grown tree: node arena rooted at id 0."""

    nodes: tuple[Node, ...]
    params: TreeParams
    n_features: int
    fingerprint: str

    @property
    def root(self) -> Node:
        return self.nodes[0]

    @property
    def n_dim(self) -> int:
        """Columns of the response representation (1, or n_classes)."""
        return 1 if self.params.task == REGRESSION else self.params.n_classes

    def inner_ids(self) -> list[int]:
        return [node.id for node in self.nodes if not node.is_leaf]

    def leaf_ids(self) -> list[int]:
        return [node.id for node in self.nodes if node.is_leaf]

    @cached_property
    def arrays(self) -> "_TreeArrays":
        return _TreeArrays(self)


class _TreeArrays:
    """Column-oriented view of a tree for batched routing and aggregation.

    Children are always created after their parent, so iterating depth levels
    in descending order propagates leaf statistics bottom-up.
    """

    def __init__(self, tree: Tree):
        nodes = tree.nodes
        count = len(nodes)
        dim = tree.n_dim
        self.feature = np.array([n.feature for n in nodes], dtype=np.int64)
        self.threshold = np.array([n.threshold for n in nodes], dtype=np.float64)
        self.left = np.array([n.left for n in nodes], dtype=np.int64)
        self.right = np.array([n.right for n in nodes], dtype=np.int64)
        self.depth = np.array([n.depth for n in nodes], dtype=np.int64)
        self.n_weighted = np.array([n.n_samples for n in nodes], dtype=np.float64)
        self.gain = np.array([n.gain for n in nodes], dtype=np.float64)
        self.mean = np.vstack([n.mean for n in nodes]).reshape(count, dim)
        self.parent = np.full(count, -1, dtype=np.int64)
        for node in nodes:
            if not node.is_leaf:
                self.parent[node.left] = node.id
                self.parent[node.right] = node.id
        # Non-root nodes: the edge from the parent contributes
        # mean(child) - mean(parent) to the parent's split feature.
        nonroot = np.arange(1, count, dtype=np.int64)
        self.edge_feature = self.feature[self.parent[nonroot]] if count > 1 else nonroot
        self.edge_delta = (
            self.mean[nonroot] - self.mean[self.parent[nonroot]]
            if count > 1
            else np.zeros((0, dim))
        )
        order = np.argsort(self.depth[nonroot], kind="stable")
        by_depth = nonroot[order]
        bounds = np.searchsorted(self.depth[by_depth], np.arange(1, self.depth.max() + 2))
        self.levels_desc = [
            by_depth[a:b] for a, b in zip(np.r_[0, bounds[:-1]], bounds) if a < b
        ][::-1]

    def route(self, X: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Leaf node id reached by each of the given rows of X."""
        cur = np.zeros(rows.size, dtype=np.int64)
        while True:
            feats = self.feature[cur]
            active = feats >= 0
            if not active.any():
                return cur
            r = rows[active]
            c = cur[active]
            go_left = X[r, feats[active]] <= self.threshold[c]
            cur[active] = np.where(go_left, self.left[c], self.right[c])

    def aggregate(self, leaf_of_row: np.ndarray, values: np.ndarray) -> np.ndarray:
        """Sum per-row values into their leaf, then up to every ancestor.

        Returns a (n_nodes, values.shape[1]) matrix; row t is the total over
        all routed rows whose leaf lies in the subtree of node t.
        """
        count = self.feature.size
        values = np.atleast_2d(values.T).T  # (m, d)
        totals = np.zeros((count, values.shape[1]))
        for d in range(values.shape[1]):
            totals[:, d] = np.bincount(leaf_of_row, weights=values[:, d], minlength=count)
        for level in self.levels_desc:
            np.add.at(totals, self.parent[level], totals[level])
        return totals


# ---------------------------------------------------------------------------
# Impurity math
# ---------------------------------------------------------------------------


def _as_response_rows(responses, task: str, n_classes: int | None) -> np.ndarray:
    responses = np.asarray(responses)
    if responses.size == 0:
        raise ConfigurationError("impurity of an empty sample is undefined")
    if task == REGRESSION:
        return np.asarray(responses, dtype=np.float64).reshape(-1, 1)
    labels = np.asarray(responses, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 1
    return one_hot(labels, max(n_classes, 1))


def impurity(responses, task: str, weights=None, n_classes: int | None = None) -> float:
    """Weighted within-node variance of the responses; for classification the
    per-coordinate variance of one-hot rows summed over coordinates, which
    equals the Gini index."""
    rows = _as_response_rows(responses, task, n_classes)
    w = np.ones(rows.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        raise ConfigurationError("impurity needs positive total weight")
    mean = (w[:, None] * rows).sum(axis=0) / total
    centered = rows - mean
    return float((w[:, None] * centered * centered).sum() / total)


def impurity_decrease(
    parent_responses,
    left_responses,
    right_responses,
    task: str,
    weights: tuple | None = None,
    n_classes: int | None = None,
) -> float:
    """Impurity decrease of a split, computed in the product form
    (Wl*Wr/W^2) * ||mean_left - mean_right||^2, which agrees with the
    parent-minus-children definition to rounding error but never goes
    negative."""
    if n_classes is None and task == CLASSIFICATION:
        merged = np.concatenate(
            [np.asarray(parent_responses).ravel(), np.asarray(left_responses).ravel()]
        )
        n_classes = int(np.max(merged)) + 1
    left = _as_response_rows(left_responses, task, n_classes)
    right = _as_response_rows(right_responses, task, n_classes)
    wl, wr = (
        (np.ones(left.shape[0]), np.ones(right.shape[0]))
        if weights is None
        else (np.asarray(weights[1], dtype=np.float64), np.asarray(weights[2], dtype=np.float64))
    )
    total_l, total_r = wl.sum(), wr.sum()
    total = total_l + total_r
    mean_l = (wl[:, None] * left).sum(axis=0) / total_l
    mean_r = (wr[:, None] * right).sum(axis=0) / total_r
    diff = mean_l - mean_r
    return float((total_l * total_r) / (total * total) * (diff * diff).sum())


# ---------------------------------------------------------------------------
# Split search
# ---------------------------------------------------------------------------


def _search_split(X, rows, feats, w, weighted_rows, total_w, min_leaf, allow_zero_gain):
    """Best (feature, threshold, gain) over candidate features and midpoint
    thresholds, or None.

    Gain ties resolve to the earliest feature in ``feats`` (callers pass the
    random draw order, so tied features win uniformly), then to the smallest
    threshold.  Exact ties dominate small deep nodes, so a biased order here
    visibly skews which features accumulate importance.
    """
    m = rows.size
    if m < 2:
        return None
    sub = X[np.ix_(rows, feats)]  # (m, q)
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    boundary = xs[1:] > xs[:-1]
    if not boundary.any():
        return None
    wl = np.cumsum(w[order], axis=0)[:-1]  # (m-1, q) left weight
    wr = total_w - wl
    valid = boundary & (wl >= min_leaf) & (wr >= min_leaf)
    if not valid.any():
        return None
    left_sum = np.cumsum(weighted_rows[order], axis=0)[:-1]  # (m-1, q, D)
    diff = left_sum / wl[:, :, None] - (weighted_rows.sum(axis=0) - left_sum) / wr[:, :, None]
    gain = wl * wr / (total_w * total_w) * np.einsum("ijd,ijd->ij", diff, diff)
    gain = np.where(valid, gain, -1.0)
    flat = int(np.argmax(gain.ravel(order="F")))  # feature-major: ties break as documented
    q_idx, i_idx = divmod(flat, m - 1)
    best = float(gain[i_idx, q_idx])
    if best < 0.0 or (best == 0.0 and not allow_zero_gain):
        return None
    low = xs[i_idx, q_idx]
    high = xs[i_idx + 1, q_idx]
    threshold = low + (high - low) / 2.0
    if threshold >= high:  # midpoint rounded up; keep the boundary point right
        threshold = low
    return int(feats[q_idx]), float(threshold), best


def best_split(rows, candidate_features, dataset: Dataset, inbag, min_leaf: int,
               allow_zero_gain: bool = False):
    """Search the node given by ``rows`` for its impurity-maximizing split.

    Returns (feature, threshold, gain) or None when no split satisfies the
    leaf-size constraint or the best gain is zero.  Gain ties resolve to the
    earliest entry of ``candidate_features``, then the smallest threshold.
    """
    rows = np.asarray(rows, dtype=np.int64)
    feats = np.asarray(candidate_features, dtype=np.int64)
    inbag = np.asarray(inbag, dtype=np.float64)
    rows = rows[inbag[rows] > 0]
    w = inbag[rows]
    matrix = response_matrix(dataset)[rows]
    weighted = w[:, None] * matrix
    return _search_split(
        dataset.features, rows, feats, w, weighted, w.sum(), min_leaf, allow_zero_gain
    )


# ---------------------------------------------------------------------------
# Growth
# ---------------------------------------------------------------------------


def grow_tree(dataset: Dataset, sample: SampleSplit, params: TreeParams, rng: Rng) -> Tree:
    """Grow a CART tree on the in-bag rows of ``sample``.

    At every node a fresh uniform subset of ``mtry`` candidate features is
    drawn; growth stops when responses are constant, the depth cap is hit, or
    no split leaves ``min_leaf`` weighted samples in both children.
    """
    if params.task != dataset.task:
        raise ConfigurationError(
            f"params are for {params.task}, dataset is {dataset.task}"
        )
    if params.task == CLASSIFICATION and params.n_classes != dataset.n_classes:
        raise ConfigurationError("params.n_classes does not match the dataset")
    if sample.n != dataset.n:
        raise ConfigurationError("sample was drawn for a different row count")
    mtry = dataset.p if params.mtry is None else params.mtry
    if mtry > dataset.p:
        raise ConfigurationError(f"mtry={mtry} exceeds p={dataset.p}")

    X = dataset.features
    y_raw = dataset.response
    matrix = response_matrix(dataset)
    inbag = sample.inbag.astype(np.float64)
    root_rows = np.flatnonzero(sample.inbag > 0)
    if root_rows.size == 0:
        raise ConfigurationError("in-bag sample is empty")

    nodes: list[Node] = []
    # Stack entries: (rows, depth, parent id, is_left).  Right child pushed
    # first so ids come out in left-first preorder.
    stack: list[tuple[np.ndarray, int, int, bool]] = [(root_rows, 0, -1, False)]
    while stack:
        rows, depth, parent, is_left = stack.pop()
        w = inbag[rows]
        total_w = w.sum()
        weighted = w[:, None] * matrix[rows]
        mean = weighted.sum(axis=0) / total_w
        node_id = len(nodes)
        if parent >= 0:
            parent_node = nodes[parent]
            nodes[parent] = replace(
                parent_node, **{("left" if is_left else "right"): node_id}
            )

        split = None
        constant = bool(np.all(y_raw[rows] == y_raw[rows[0]]))
        depth_capped = params.max_depth is not None and depth >= params.max_depth
        if not constant and not depth_capped and total_w >= 2 * params.min_leaf:
            # Candidates stay in draw order so gain ties fall uniformly.
            feats = rng.choice(dataset.p, size=mtry, replace=False)
            split = _search_split(
                X, rows, feats, w, weighted, total_w,
                params.min_leaf, params.allow_zero_gain_splits,
            )

        if split is None:
            nodes.append(Node(id=node_id, depth=depth, n_samples=int(round(total_w)), mean=mean))
            continue
        feature, threshold, gain = split
        nodes.append(
            Node(
                id=node_id,
                depth=depth,
                n_samples=int(round(total_w)),
                mean=mean,
                feature=feature,
                threshold=threshold,
                gain=gain,
            )
        )
        go_left = X[rows, feature] <= threshold
        stack.append((rows[~go_left], depth + 1, node_id, False))
        stack.append((rows[go_left], depth + 1, node_id, True))

    return Tree(
        nodes=tuple(nodes),
        params=params,
        n_features=dataset.p,
        fingerprint=dataset.fingerprint(),
    )


# ---------------------------------------------------------------------------
# Prediction and decomposition
# ---------------------------------------------------------------------------


def _leaf_for(tree: Tree, x: np.ndarray) -> Node:
    node = tree.root
    while not node.is_leaf:
        node = tree.nodes[node.left if x[node.feature] <= node.threshold else node.right]
    return node


def _present(tree: Tree, mean: np.ndarray):
    return float(mean[0]) if tree.params.task == REGRESSION else mean.copy()


def predict(tree: Tree, x) -> float | np.ndarray:
    """Mean response of the leaf whose region contains x (left on <=)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tree.n_features,) or not np.all(np.isfinite(x)):
        raise ConfigurationError(f"x must be {tree.n_features} finite coordinates")
    return _present(tree, _leaf_for(tree, x).mean)


def predict_matrix(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Leaf means for many rows at once; always (len(X), D)."""
    rows = np.arange(X.shape[0])
    leaves = tree.arrays.route(X, rows)
    return tree.arrays.mean[leaves]


def contribution(tree: Tree, x, feature: int) -> float | np.ndarray:
    """Sum, along x's root-to-leaf path, of (mean of the child entered minus
    mean of the node) over the nodes that split on ``feature``."""
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= feature < tree.n_features:
        raise ConfigurationError(f"feature index {feature} out of range")
    total = np.zeros(tree.n_dim)
    node = tree.root
    while not node.is_leaf:
        child = tree.nodes[node.left if x[node.feature] <= node.threshold else node.right]
        if node.feature == feature:
            total += child.mean - node.mean
        node = child
    return _present(tree, total)


def contribution_totals(tree: Tree, X: np.ndarray, rows: np.ndarray,
                        values: np.ndarray) -> np.ndarray:
    """Per-feature sums  sum_i <f_k(x_i), v_i>  for the given rows and
    per-row value vectors ``values`` (m, D), computed in one pass by
    aggregating row values up the tree and dotting them with edge deltas."""
    arrays = tree.arrays
    leaf_of_row = arrays.route(X, rows)
    totals = arrays.aggregate(leaf_of_row, values)  # (n_nodes, D)
    scores = np.zeros(tree.n_features)
    if len(tree.nodes) > 1:
        per_edge = np.einsum("nd,nd->n", arrays.edge_delta, totals[1:])
        np.add.at(scores, arrays.edge_feature, per_edge)
    return scores


# ---------------------------------------------------------------------------
# Pruning and serialization
# ---------------------------------------------------------------------------


def collapse_node(tree: Tree, node_id: int) -> Tree:
    """Collapse an inner node whose children are both leaves into a leaf,
    yielding the sub-tree obtained by that single pruning."""
    target = tree.nodes[node_id]
    if target.is_leaf:
        raise ConfigurationError(f"node {node_id} is already a leaf")
    left, right = tree.nodes[target.left], tree.nodes[target.right]
    if not (left.is_leaf and right.is_leaf):
        raise ConfigurationError(f"children of node {node_id} are not both leaves")
    removed = {left.id, right.id}
    keep = [n for n in tree.nodes if n.id not in removed]
    remap = {n.id: i for i, n in enumerate(keep)}
    rebuilt = []
    for node in keep:
        if node.id == node_id:
            rebuilt.append(
                Node(id=remap[node.id], depth=node.depth,
                     n_samples=node.n_samples, mean=node.mean)
            )
        elif node.is_leaf:
            rebuilt.append(replace(node, id=remap[node.id]))
        else:
            rebuilt.append(
                replace(node, id=remap[node.id], left=remap[node.left], right=remap[node.right])
            )
    return Tree(
        nodes=tuple(rebuilt),
        params=tree.params,
        n_features=tree.n_features,
        fingerprint=tree.fingerprint,
    )


def tree_to_dict(tree: Tree) -> dict:
    """JSON-ready document: node list with ids, splits, means, and counts."""
    def mean_of(node: Node):
        if tree.params.task == REGRESSION:
            return float(node.mean[0])
        return [float(v) for v in node.mean]

    node_docs = []
    for node in tree.nodes:
        doc = {"id": node.id, "depth": node.depth, "n": node.n_samples, "mean": mean_of(node)}
        if not node.is_leaf:
            doc["split"] = {
                "feature": node.feature,
                "threshold": node.threshold,
                "left": node.left,
                "right": node.right,
                "gain": node.gain,
            }
        node_docs.append(doc)
    return {
        "task": tree.params.task,
        "n_classes": tree.params.n_classes,
        "n_features": tree.n_features,
        "fingerprint": tree.fingerprint,
        "params": {
            "min_leaf": tree.params.min_leaf,
            "max_depth": tree.params.max_depth,
            "mtry": tree.params.mtry,
            "allow_zero_gain_splits": tree.params.allow_zero_gain_splits,
        },
        "nodes": node_docs,
    }


def tree_from_dict(doc: dict) -> Tree:
    params = TreeParams(
        min_leaf=doc["params"]["min_leaf"],
        max_depth=doc["params"]["max_depth"],
        mtry=doc["params"]["mtry"],
        task=doc["task"],
        n_classes=doc["n_classes"],
        allow_zero_gain_splits=doc["params"]["allow_zero_gain_splits"],
    )
    nodes = []
    for entry in doc["nodes"]:
        mean = np.atleast_1d(np.asarray(entry["mean"], dtype=np.float64))
        split = entry.get("split")
        if split is None:
            nodes.append(Node(id=entry["id"], depth=entry["depth"],
                              n_samples=entry["n"], mean=mean))
        else:
            nodes.append(
                Node(
                    id=entry["id"], depth=entry["depth"], n_samples=entry["n"], mean=mean,
                    feature=split["feature"], threshold=split["threshold"],
                    left=split["left"], right=split["right"], gain=split["gain"],
                )
            )
    return Tree(
        nodes=tuple(nodes),
        params=params,
        n_features=doc["n_features"],
        fingerprint=doc["fingerprint"],
    )
