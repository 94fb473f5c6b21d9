"""Replicated parameter sweeps: importance scores against minimum leaf size
or depth cap, and the pure-noise probe that checks the inverse-leaf-size
scaling of the total importance mass landing on noise features."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path

import numpy as np

from .data import REGRESSION, feature_name
from .errors import ConfigurationError
from .forest import ForestParams, Sampling, train_forest
from .generators import GeneratorSpec
from .importance import compute_importance, noise_mass
from .rng import Rng
from .tree import TreeParams

AXIS_MIN_LEAF = "min_leaf"
AXIS_MAX_DEPTH = "max_depth"


@dataclass
class SweepTable:
    """One row per grid value: replicate-averaged per-feature scores with
    standard errors, plus the noise-mass column."""

    axis: str
    grid: np.ndarray
    method: str
    feature_names: list[str]
    mean_scores: np.ndarray
    stderr_scores: np.ndarray
    noise_mass_mean: np.ndarray
    noise_mass_stderr: np.ndarray
    replicates: int

    @property
    def p(self) -> int:
        return len(self.feature_names)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "sweep",
            "axis": self.axis,
            "method": self.method,
            "replicates": self.replicates,
            "grid": [int(v) for v in self.grid],
            "feature_names": list(self.feature_names),
            "mean_scores": [[float(v) for v in row] for row in self.mean_scores],
            "stderr_scores": [[float(v) for v in row] for row in self.stderr_scores],
            "noise_mass_mean": [float(v) for v in self.noise_mass_mean],
            "noise_mass_stderr": [float(v) for v in self.noise_mass_stderr],
        }

    def write_csv(self, path) -> None:
        """Stable columns: axis value, <name>_mean/_stderr per feature,
        noise_mass_mean, noise_mass_stderr, replicates."""
        header = [self.axis]
        for name in self.feature_names:
            header += [f"{name}_mean", f"{name}_stderr"]
        header += ["noise_mass_mean", "noise_mass_stderr", "replicates"]
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, value in enumerate(self.grid):
                row = [int(value)]
                for j in range(self.p):
                    row += [repr(float(self.mean_scores[i, j])),
                            repr(float(self.stderr_scores[i, j]))]
                row += [
                    repr(float(self.noise_mass_mean[i])),
                    repr(float(self.noise_mass_stderr[i])),
                    self.replicates,
                ]
                writer.writerow(row)


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line for noise mass against inverse minimum leaf size."""

    slope: float
    intercept: float
    pearson_r: float


def _axis_params(base: ForestParams, axis: str, value: int) -> ForestParams:
    if axis == AXIS_MIN_LEAF:
        tree = replace(base.tree, min_leaf=int(value))
    elif axis == AXIS_MAX_DEPTH:
        tree = replace(base.tree, max_depth=int(value), min_leaf=1)
    else:
        raise ConfigurationError(f"unknown sweep axis {axis!r}")
    return replace(base, tree=tree)


def _sweep_job(generator: GeneratorSpec, base: ForestParams, axis: str, method: str,
               seed: int, n_repeats: int, job: tuple[int, int, int]):
    grid_index, value, replicate = job
    rng = Rng(seed).split(grid_index).split(replicate)
    dataset = generator.sample(rng.split(0))
    params = replace(_axis_params(base, axis, value), seed=rng.derive_seed(1))
    forest = train_forest(dataset, params)
    vector = compute_importance(method, forest, dataset, rng=rng.split(2), n_repeats=n_repeats)
    return grid_index, replicate, vector.scores, noise_mass(vector, dataset.relevant_set)


def _run_sweep(generator: GeneratorSpec, grid, base: ForestParams, replicates: int,
               method: str, seed: int, axis: str, workers: int, n_repeats: int) -> SweepTable:
    grid = np.asarray(list(grid), dtype=np.int64)
    if grid.size == 0:
        raise ConfigurationError("sweep grid must be non-empty")
    if np.any(np.diff(grid) <= 0):
        raise ConfigurationError("sweep grid must be strictly ascending")
    if replicates < 1:
        raise ConfigurationError("replicates must be >= 1")
    jobs = [
        (gi, int(value), r)
        for gi, value in enumerate(grid)
        for r in range(replicates)
    ]
    run = partial(_sweep_job, generator, base, axis, method, seed, n_repeats)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run, jobs))
    else:
        outputs = [run(job) for job in jobs]

    p = outputs[0][2].shape[0]
    scores = np.zeros((grid.size, replicates, p))
    masses = np.zeros((grid.size, replicates))
    for gi, r, vector, mass in outputs:
        scores[gi, r] = vector
        masses[gi, r] = mass
    if replicates > 1:
        stderr = scores.std(axis=1, ddof=1) / np.sqrt(replicates)
        mass_stderr = masses.std(axis=1, ddof=1) / np.sqrt(replicates)
    else:
        stderr = np.zeros((grid.size, p))
        mass_stderr = np.zeros(grid.size)
    return SweepTable(
        axis=axis,
        grid=grid,
        method=method,
        feature_names=[feature_name(k) for k in range(p)],
        mean_scores=scores.mean(axis=1),
        stderr_scores=stderr,
        noise_mass_mean=masses.mean(axis=1),
        noise_mass_stderr=mass_stderr,
        replicates=replicates,
    )


def sweep_leaf_size(generator: GeneratorSpec, grid, base: ForestParams, replicates: int,
                    method: str, seed: int, workers: int = 1, n_repeats: int = 1) -> SweepTable:
    """Train ``replicates`` forests per minimum leaf size on fresh generator
    draws and record the replicate-averaged importance scores."""
    return _run_sweep(generator, grid, base, replicates, method, seed,
                      AXIS_MIN_LEAF, workers, n_repeats)


def sweep_depth(generator: GeneratorSpec, grid, base: ForestParams, replicates: int,
                method: str, seed: int, workers: int = 1, n_repeats: int = 1) -> SweepTable:
    """As :func:`sweep_leaf_size` along the depth-cap axis, with min_leaf
    pinned to 1 so the cap is the binding constraint."""
    return _run_sweep(generator, grid, base, replicates, method, seed,
                      AXIS_MAX_DEPTH, workers, n_repeats)


def noise_scaling_probe(
    n: int,
    p: int,
    grid,
    replicates: int,
    seed: int,
    n_trees: int = 10,
    workers: int = 1,
) -> tuple[SweepTable, ScalingFit]:
    """Pure-noise leaf-size sweep plus a least-squares fit of the mean noise
    mass against 1 / min_leaf.

    Greedy trees fit noise in proportion to how small their leaves may get;
    the fit's Pearson r quantifies how closely the decay tracks 1 / min_leaf.
    Trees are grown on subsamples (fraction 1 - 1/e, the bootstrap's expected
    unique share) so each sees i.i.d. rows and leaf size is the only binding
    constraint; bootstrap multiplicities would add an offset at small leaves.
    """
    generator = GeneratorSpec("pure-noise", {"n": n, "p": p})
    base = ForestParams(
        n_trees=n_trees,
        tree=TreeParams(min_leaf=1, mtry=None, task=REGRESSION),
        sampling=Sampling("subsample", 0.632),
        seed=0,
    )
    table = sweep_leaf_size(generator, grid, base, replicates, "mdi", seed, workers)
    inverse = 1.0 / table.grid.astype(np.float64)
    if table.grid.size >= 2:
        slope, intercept = np.polyfit(inverse, table.noise_mass_mean, 1)
        if np.std(table.noise_mass_mean) > 0:
            pearson = float(np.corrcoef(inverse, table.noise_mass_mean)[0, 1])
        else:
            pearson = float("nan")
    else:
        slope = intercept = pearson = float("nan")
    return table, ScalingFit(slope=float(slope), intercept=float(intercept), pearson_r=pearson)
