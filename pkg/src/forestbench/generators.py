"""Synthetic benchmark data: a mixed-cardinality classification setting, a
discrete grid with known relevant features, an equicorrelated surrogate for
messy real-world pipelines, and a pure-noise setting for bias probes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .data import CLASSIFICATION, REGRESSION, Dataset, FeatureKind
from .errors import ConfigurationError
from .rng import Rng

STROBL_CATEGORIES = (4, 10, 20)


def gen_strobl(n: int, rng: Rng) -> Dataset:
    """Five features of wildly different cardinality; only the binary second
    feature carries signal, via P(y=1) = (1 + x2) / 3."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    x1 = rng.normal(size=n)
    x2 = rng.integers(0, 2, size=n).astype(np.float64)
    cats = [rng.integers(0, k, size=n).astype(np.float64) for k in STROBL_CATEGORIES]
    features = np.column_stack([x1, x2, *cats])
    labels = (rng.random(n) < (1.0 + x2) / 3.0).astype(np.int64)
    kinds = (
        FeatureKind.numeric(),
        FeatureKind.categorical(2),
        *(FeatureKind.categorical(k) for k in STROBL_CATEGORIES),
    )
    return Dataset(
        features=features,
        response=labels,
        task=CLASSIFICATION,
        n_classes=2,
        feature_kinds=kinds,
        relevant_set=frozenset({1}),
    )


def _logistic(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def grid_signal_variance(relevant: frozenset[int]) -> float:
    """Closed-form variance of (1/5) sum_{j in S} X_j / j for independent
    X_j uniform on {0..j}: each X_j / j has variance (j + 2) / (12 j)."""
    return sum((j + 2) / (12.0 * j) for j in (k + 1 for k in relevant)) / 25.0


def gen_discrete_grid(
    n: int,
    p: int,
    n_relevant: int,
    task: str,
    noise_mult: float,
    rng: Rng,
    relevant: tuple[int, ...] | None = None,
) -> Dataset:
    """Feature j (1-indexed) is uniform on {0..j}; a random subset of the
    first ten features drives the response.

    Classification: P(Y=1|X) = logistic((2/5) sum_{j in S} X_j/j - 1).
    Regression: Y = (1/5) sum_{j in S} X_j/j + noise with variance
    ``noise_mult`` times the analytic signal variance.

    Pass ``relevant`` (0-indexed) to pin the relevant set across draws.
    """
    if n < 1 or p < 1:
        raise ConfigurationError("n and p must be >= 1")
    pool = min(10, p)
    if n_relevant > 10:
        raise ConfigurationError("n_relevant cannot exceed 10 (drawn from the first ten features)")
    if n_relevant > pool:
        raise ConfigurationError(f"n_relevant={n_relevant} exceeds available pool {pool}")
    if noise_mult < 0:
        raise ConfigurationError("noise_mult must be non-negative")
    features = np.column_stack(
        [rng.integers(0, j + 1, size=n).astype(np.float64) for j in range(1, p + 1)]
    )
    if relevant is None:
        chosen = frozenset(int(k) for k in rng.choice(pool, size=n_relevant, replace=False))
    else:
        chosen = frozenset(int(k) for k in relevant)
        if len(chosen) != n_relevant or any(k < 0 or k >= pool for k in chosen):
            raise ConfigurationError("pinned relevant set must be n_relevant indices in the pool")
    weights = np.zeros(p)
    for k in chosen:
        weights[k] = 1.0 / (k + 1)
    raw = features @ weights
    kinds = tuple(FeatureKind.categorical(j + 1) for j in range(1, p + 1))
    if task == CLASSIFICATION:
        prob = _logistic(0.4 * raw - 1.0)
        response = (rng.random(n) < prob).astype(np.int64)
        return Dataset(features, response, CLASSIFICATION, kinds, 2, chosen)
    if task == REGRESSION:
        signal = 0.2 * raw
        sigma = math.sqrt(noise_mult * grid_signal_variance(chosen))
        response = signal + (rng.normal(size=n) * sigma if sigma > 0 else 0.0)
        return Dataset(features, response, REGRESSION, kinds, None, chosen)
    raise ConfigurationError(f"unknown task {task!r}")


def gen_correlated_surrogate(
    n: int,
    p: int,
    correlation: float,
    rng: Rng,
    task: str = CLASSIFICATION,
    n_relevant: int = 5,
    noise_mult: float = 100.0,
    relevant: tuple[int, ...] | None = None,
) -> Dataset:
    """Equicorrelated Gaussian copula pushed through mixed marginals, all on
    [0, 1], with the response driven by unweighted sums of relevant columns.

    Stands in for heterogeneous, dependent real-data pipelines.
    """
    if not 0.0 <= correlation < 1.0:
        raise ConfigurationError("correlation must lie in [0, 1)")
    if n < 1 or p < 1:
        raise ConfigurationError("n and p must be >= 1")
    if not 1 <= n_relevant <= p:
        raise ConfigurationError("n_relevant must lie in 1..p")
    shared = rng.normal(size=(n, 1))
    own = rng.normal(size=(n, p))
    latent = math.sqrt(correlation) * shared + math.sqrt(1.0 - correlation) * own
    uniform = norm.cdf(latent)

    # Marginal cycle: numeric, then categorical with 2/4/10/20 levels.
    cycle: list[FeatureKind] = [
        FeatureKind.numeric(),
        FeatureKind.categorical(2),
        FeatureKind.categorical(4),
        FeatureKind.categorical(10),
        FeatureKind.categorical(20),
    ]
    features = np.empty((n, p))
    kinds = []
    for k in range(p):
        kind = cycle[k % len(cycle)]
        kinds.append(kind)
        if kind.kind == "numeric":
            features[:, k] = uniform[:, k]
        else:
            levels = kind.categories
            codes = np.minimum((uniform[:, k] * levels).astype(np.int64), levels - 1)
            features[:, k] = codes / (levels - 1)
    if relevant is None:
        chosen = frozenset(int(k) for k in rng.choice(p, size=n_relevant, replace=False))
    else:
        chosen = frozenset(int(k) for k in relevant)
        if len(chosen) != n_relevant or any(k < 0 or k >= p for k in chosen):
            raise ConfigurationError("pinned relevant set must be n_relevant valid indices")
    mask = np.zeros(p)
    mask[list(chosen)] = 1.0
    raw = features @ mask
    if task == CLASSIFICATION:
        prob = _logistic(0.4 * raw - 1.0)
        response = (rng.random(n) < prob).astype(np.int64)
        return Dataset(features, response, CLASSIFICATION, tuple(kinds), 2, chosen)
    signal = 0.2 * raw
    sigma = math.sqrt(noise_mult * float(np.var(signal)))
    response = signal + (rng.normal(size=n) * sigma if sigma > 0 else 0.0)
    return Dataset(features, response, REGRESSION, tuple(kinds), None, chosen)


def gen_pure_noise(n: int, p: int, rng: Rng) -> Dataset:
    """Uniform [0,1] features entirely independent of a standard normal
    response; the relevant set is empty."""
    if n < 1 or p < 1:
        raise ConfigurationError("n and p must be >= 1")
    features = rng.random((n, p))
    response = rng.normal(size=n)
    kinds = tuple(FeatureKind.numeric() for _ in range(p))
    return Dataset(features, response, REGRESSION, kinds, None, frozenset())


GENERATOR_NAMES = ("strobl", "discrete-grid", "correlated-surrogate", "pure-noise")


@dataclass(frozen=True)
class GeneratorSpec:
    """Picklable by-name generator description, usable across processes."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in GENERATOR_NAMES:
            raise ConfigurationError(f"unknown generator {self.name!r}")

    def sample(self, rng: Rng) -> Dataset:
        params = dict(self.params)
        if self.name == "strobl":
            return gen_strobl(rng=rng, **params)
        if self.name == "discrete-grid":
            return gen_discrete_grid(rng=rng, **params)
        if self.name == "correlated-surrogate":
            return gen_correlated_surrogate(rng=rng, **params)
        return gen_pure_noise(rng=rng, **params)
