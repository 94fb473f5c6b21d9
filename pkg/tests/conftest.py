import numpy as np
import pytest

from forestbench import (
    CLASSIFICATION,
    REGRESSION,
    Dataset,
    FeatureKind,
    Rng,
    TreeParams,
    draw_sample,
    gen_discrete_grid,
    gen_pure_noise,
    grow_tree,
)


@pytest.fixture
def tiny_regression():
    """Four rows, one perfectly separating feature: responses 0,0,1,1."""
    features = np.array([[0.0, 5.0], [1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    response = np.array([0.0, 0.0, 1.0, 1.0])
    return Dataset(
        features=features,
        response=response,
        task=REGRESSION,
        feature_kinds=(FeatureKind.numeric(), FeatureKind.numeric()),
    )


@pytest.fixture
def tiny_classification():
    features = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0]])
    response = np.array([0, 0, 1, 1])
    return Dataset(
        features=features,
        response=response,
        task=CLASSIFICATION,
        n_classes=2,
        feature_kinds=(FeatureKind.numeric(), FeatureKind.numeric()),
    )


def random_tree_case(seed: int):
    """A random (dataset, sample, params, tree) tuple spanning both tasks and
    both sampling modes; shared by the equivalence and invariant tests."""
    rng = Rng(seed)
    n = int(rng.integers(20, 301))
    p = int(rng.integers(2, 16))
    task = CLASSIFICATION if seed % 2 else REGRESSION
    if task == CLASSIFICATION:
        dataset = gen_discrete_grid(
            n, p, min(3, min(10, p)), task, 100.0, rng.split(0)
        )
    else:
        dataset = gen_pure_noise(n, p, rng.split(0))
    if seed % 3:
        sample = draw_sample(n, "bootstrap", rng.split(1))
    else:
        sample = draw_sample(n, "subsample", rng.split(1), fraction=0.7)
    params = TreeParams(
        min_leaf=int(rng.integers(1, 6)),
        max_depth=None if seed % 4 else int(rng.integers(2, 9)),
        mtry=max(1, p // 2),
        task=task,
        n_classes=2 if task == CLASSIFICATION else None,
    )
    tree = grow_tree(dataset, sample, params, rng.split(2))
    return dataset, sample, params, tree
