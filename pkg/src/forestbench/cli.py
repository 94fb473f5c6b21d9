"""Command-line surface tying generators, training, estimators, sweeps, and
benchmark reports together.

Every subcommand is deterministic given --seed and produces identical output
for any --workers value.  Exit codes: 0 success, 2 usage error, 1 runtime
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

from .data import (
    CLASSIFICATION,
    REGRESSION,
    load_csv,
    read_dataset_csv,
    write_dataset_csv,
)
from .errors import ConfigurationError, CsvParseError, OutOfBagError
from .evaluate import ExperimentConfig, run_experiment, write_report
from .forest import ForestParams, Sampling, load_forest, save_forest, train_forest
from .generators import GENERATOR_NAMES, GeneratorSpec
from .importance import METHOD_NAMES, compute_importance
from .plots import render_sweep_svg
from .rng import Rng
from .sweeps import noise_scaling_probe, sweep_depth, sweep_leaf_size
from .tree import TreeParams

SWEEP_AXES = ("min-leaf", "max-depth", "inverse-leaf")


# ---------------------------------------------------------------------------
# Flag parsing helpers (ArgumentTypeError -> usage error, exit code 2)
# ---------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return value


def _sampling(text: str) -> Sampling:
    try:
        return Sampling.parse(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _methods(text: str) -> tuple[str, ...]:
    methods = tuple(part.strip() for part in text.split(",") if part.strip())
    unknown = [m for m in methods if m not in METHOD_NAMES]
    if not methods or unknown:
        raise argparse.ArgumentTypeError(
            f"methods must be a comma list from {', '.join(METHOD_NAMES)}"
        )
    return methods


def _grid(text: str) -> tuple[int, ...]:
    """Accept 'lo:hi' (inclusive range) or a comma list of integers."""
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            values = tuple(range(int(lo), int(hi) + 1))
        else:
            values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid spec {text!r}") from None
    if not values or any(b <= a for a, b in zip(values, values[1:])) or values[0] < 1:
        raise argparse.ArgumentTypeError("grid must be ascending positive integers")
    return values


# ---------------------------------------------------------------------------
# Flat key=value config files
# ---------------------------------------------------------------------------


def parse_config_text(text: str, source: str) -> dict[str, str]:
    """Parse 'key = value' lines; '#' lines are comments.  Malformed lines
    report their line number."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigurationError(f"{source}: line {lineno}: expected 'key = value'")
        if key in mapping:
            raise ConfigurationError(f"{source}: line {lineno}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


def available_presets() -> list[str]:
    root = resources.files("forestbench") / "presets"
    return sorted(entry.name[: -len(".cfg")] for entry in root.iterdir()
                  if entry.name.endswith(".cfg"))


def load_config(spec: str) -> tuple[dict[str, str], str]:
    """Load a config mapping from a file path or a shipped preset name."""
    path = Path(spec)
    if path.exists():
        return parse_config_text(path.read_text(encoding="utf-8"), str(path)), str(path)
    preset = resources.files("forestbench") / "presets" / f"{spec}.cfg"
    if preset.is_file():
        return parse_config_text(preset.read_text(encoding="utf-8"), spec), spec
    raise ConfigurationError(
        f"no config file or preset named {spec!r}; presets: {', '.join(available_presets())}"
    )


_BOOL_VALUES = {"true": True, "false": False, "1": True, "0": False}


def _coerce(source: str, key: str, value: str, kind):
    try:
        if kind is bool:
            return _BOOL_VALUES[value.lower()]
        return kind(value)
    except (ValueError, KeyError):
        raise ConfigurationError(f"{source}: bad value {value!r} for key {key!r}") from None


def merge_config(mapping: dict[str, str], source: str, schema: dict, overrides: dict) -> dict:
    """Coerce file values through ``schema`` and apply non-None overrides on
    top.  Unknown keys are rejected."""
    unknown = sorted(set(mapping) - set(schema))
    if unknown:
        raise ConfigurationError(f"{source}: unknown keys: {', '.join(unknown)}")
    merged = {
        key: _coerce(source, key, value, schema[key]) for key, value in mapping.items()
    }
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return merged


# ---------------------------------------------------------------------------
# Shared assembly
# ---------------------------------------------------------------------------


def _generator_task(name: str, task: str | None) -> str:
    if name == "strobl":
        return CLASSIFICATION
    if name == "pure-noise":
        return REGRESSION
    return task or CLASSIFICATION


def _generator_spec(name: str, settings: dict) -> GeneratorSpec:
    params: dict = {"n": settings.get("n", 1000)}
    if name == "strobl":
        return GeneratorSpec(name, params)
    params["p"] = settings.get("p", 50)
    if name == "pure-noise":
        return GeneratorSpec(name, params)
    task = _generator_task(name, settings.get("task"))
    if name == "discrete-grid":
        params.update(
            n_relevant=settings.get("n_relevant", 5),
            task=task,
            noise_mult=settings.get("noise_mult", 100.0),
        )
    else:  # correlated-surrogate
        params.update(
            correlation=settings.get("correlation", 0.5),
            task=task,
            n_relevant=settings.get("n_relevant", 5),
            noise_mult=settings.get("noise_mult", 100.0),
        )
    return GeneratorSpec(name, params)


def _forest_params(settings: dict, task: str, n_classes: int | None) -> ForestParams:
    tree = TreeParams(
        min_leaf=settings.get("min_leaf", 1),
        max_depth=settings.get("max_depth"),
        mtry=settings.get("mtry"),
        task=task,
        n_classes=n_classes,
        allow_zero_gain_splits=settings.get("allow_zero_gain_splits", False),
    )
    sampling = settings.get("sampling") or Sampling()
    if isinstance(sampling, str):
        sampling = Sampling.parse(sampling)
    return ForestParams(
        n_trees=settings.get("trees", 100),
        tree=tree,
        sampling=sampling,
        seed=settings.get("seed", 0),
    )


def _load_dataset(args):
    path = Path(args.data)
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    if getattr(args, "response", None):
        categorical = tuple(
            part.strip() for part in (args.categorical or "").split(",") if part.strip()
        )
        return load_csv(path, response=args.response, task=args.task, categorical=categorical)
    if sidecar.exists():
        return read_dataset_csv(path)
    raise ConfigurationError(
        f"{path} has no sidecar metadata; pass --response/--task for raw CSV files"
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    settings = {
        "n": args.n, "p": args.p, "n_relevant": args.n_relevant, "task": args.task,
        "noise_mult": args.noise_mult, "correlation": args.correlation,
    }
    spec = _generator_spec(args.generator, {k: v for k, v in settings.items() if v is not None})
    dataset = spec.sample(Rng(args.seed))
    out = _out_dir(args)
    target = out / "dataset.csv"
    write_dataset_csv(dataset, target)
    print(f"wrote {dataset.n}x{dataset.p} {dataset.task} dataset to {target}")
    return 0


def cmd_train(args) -> int:
    dataset = _load_dataset(args)
    settings = {
        "trees": args.trees, "min_leaf": args.min_leaf, "max_depth": args.max_depth,
        "mtry": args.mtry, "sampling": args.sampling, "seed": args.seed,
        "allow_zero_gain_splits": args.allow_zero_gain_splits,
    }
    params = _forest_params(settings, dataset.task, dataset.n_classes)
    forest = train_forest(dataset, params, workers=args.workers)
    out = _out_dir(args)
    target = out / "forest.json"
    save_forest(forest, target)
    total_nodes = sum(len(tree.nodes) for tree, _ in forest.trees)
    print(f"trained {forest.n_trees} trees ({total_nodes} nodes) -> {target}")
    return 0


def cmd_importance(args) -> int:
    dataset = _load_dataset(args)
    forest = load_forest(args.forest)
    rng = Rng(args.seed)
    vectors = [
        compute_importance(method, forest, dataset, rng=rng.split(j), n_repeats=args.n_repeats)
        for j, method in enumerate(args.methods)
    ]
    out = _out_dir(args)
    if args.format == "json":
        target = out / "importance.json"
        doc = {"schema_version": 1, "kind": "importance",
               "feature_names": dataset.feature_names,
               "methods": [vector.to_dict() for vector in vectors]}
        target.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        target = out / "importance.csv"
        with target.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature"] + [vector.method for vector in vectors])
            for k, name in enumerate(dataset.feature_names):
                writer.writerow([name] + [repr(float(v.scores[k])) for v in vectors])
    print(f"wrote {len(vectors)}-method importance table to {target}")
    return 0


_SWEEP_SCHEMA = {
    "axis": str, "grid": str, "generator": str, "n": int, "p": int,
    "n_relevant": int, "task": str, "noise_mult": float, "correlation": float,
    "trees": int, "mtry": int, "method": str, "replicates": int, "seed": int,
    "workers": int, "n_repeats": int,
}


def cmd_sweep(args) -> int:
    overrides = {
        "axis": args.axis, "grid": ",".join(map(str, args.grid)) if args.grid else None,
        "generator": args.generator, "n": args.n, "p": args.p,
        "n_relevant": args.n_relevant, "task": args.task, "noise_mult": args.noise_mult,
        "correlation": args.correlation, "trees": args.trees, "mtry": args.mtry,
        "method": args.method, "replicates": args.replicates, "seed": args.seed,
        "workers": args.workers, "n_repeats": args.n_repeats,
    }
    if args.config:
        mapping, source = load_config(args.config)
        settings = merge_config(mapping, source, _SWEEP_SCHEMA, overrides)
    else:
        settings = {k: v for k, v in overrides.items() if v is not None}
    axis = settings.get("axis", "min-leaf")
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"axis must be one of {', '.join(SWEEP_AXES)}")
    grid = _grid(str(settings.get("grid", "1:50")))
    seed = settings.get("seed", 0)
    replicates = settings.get("replicates", 20)
    workers = settings.get("workers", 1)
    out = _out_dir(args)

    fit = None
    if axis == "inverse-leaf":
        generator_name = settings.get("generator", "pure-noise")
        if generator_name != "pure-noise":
            raise ConfigurationError("the inverse-leaf probe runs on the pure-noise generator")
        table, fit = noise_scaling_probe(
            n=settings.get("n", 2000), p=settings.get("p", 20), grid=grid,
            replicates=replicates, seed=seed, n_trees=settings.get("trees", 10),
            workers=workers,
        )
    else:
        name = settings.get("generator", "strobl")
        if name not in GENERATOR_NAMES:
            raise ConfigurationError(f"unknown generator {name!r}")
        spec = _generator_spec(name, settings)
        probe = spec.sample(Rng(seed))
        params = _forest_params(
            {"trees": settings.get("trees", 300), "mtry": settings.get("mtry")},
            probe.task, probe.n_classes,
        )
        runner = sweep_leaf_size if axis == "min-leaf" else sweep_depth
        table = runner(
            spec, grid, params, replicates, settings.get("method", "mdi"), seed,
            workers=workers, n_repeats=settings.get("n_repeats", 1),
        )

    table.write_csv(out / "sweep.csv")
    render_sweep_svg(table, out / "sweep.svg", inverse_axis=axis == "inverse-leaf")
    (out / "sweep.json").write_text(
        json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if fit is not None:
        (out / "scaling_fit.json").write_text(
            json.dumps(
                {"slope": fit.slope, "intercept": fit.intercept, "pearson_r": fit.pearson_r},
                indent=2, sort_keys=True,
            ) + "\n",
            encoding="utf-8",
        )
        print(f"noise-mass scaling fit: pearson_r={fit.pearson_r:.4f} slope={fit.slope:.5f}")
    print(f"wrote sweep table and figure to {out}")
    return 0


_BENCH_SCHEMA = {
    "generator": str, "n": int, "p": int, "n_relevant": int, "task": str,
    "noise_mult": float, "correlation": float, "trees": int, "min_leaf": int,
    "max_depth": int, "mtry": int, "sampling": str, "methods": str,
    "replicates": int, "seed": int, "n_repeats": int, "fixed_relevant_set": bool,
    "workers": int,
}


def cmd_bench(args) -> int:
    mapping, source = load_config(args.config)
    overrides = {
        "replicates": args.replicates, "seed": args.seed, "workers": args.workers,
        "methods": ",".join(args.methods) if args.methods else None,
        "fixed_relevant_set": True if args.fixed_relevant_set else None,
    }
    settings = merge_config(mapping, source, _BENCH_SCHEMA, overrides)
    name = settings.get("generator", "discrete-grid")
    if name not in GENERATOR_NAMES:
        raise ConfigurationError(f"{source}: unknown generator {name!r}")
    spec = _generator_spec(name, settings)
    seed = settings.get("seed", 0)
    probe = spec.sample(Rng(seed))
    params = _forest_params(settings, probe.task, probe.n_classes)
    methods = _methods(settings.get("methods", "mdi,mdi-oob"))
    config = ExperimentConfig(
        generator=spec,
        forest=params,
        methods=methods,
        replicates=settings.get("replicates", 40),
        seed=seed,
        n_repeats=settings.get("n_repeats", 1),
        fixed_relevant_set=settings.get("fixed_relevant_set", False),
        workers=settings.get("workers", 1),
    )
    print(
        f"benchmark {source}: {name}, {config.replicates} replicates, "
        f"{params.n_trees} trees, methods {','.join(methods)}",
        file=sys.stderr,
    )
    results = run_experiment(config)
    out = _out_dir(args)
    target = out / f"report.{args.format}"
    write_report(results, target, format=args.format)
    means = results.mean_auc()
    errors = results.stderr_auc()
    for j, method in enumerate(methods):
        print(f"{method}: mean_auc={means[j]:.4f} stderr={errors[j]:.4f}")
    print(f"wrote report to {target}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forestbench",
        description="Random-forest feature-importance engine and benchmark harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sim = sub.add_parser("simulate", help="generate a synthetic dataset (CSV + sidecar JSON)")
    sim.add_argument("generator", choices=GENERATOR_NAMES, help="generator name")
    sim.add_argument("--n", type=_positive_int, default=None, help="rows to generate")
    sim.add_argument("--p", type=_positive_int, default=None, help="feature count")
    sim.add_argument("--n-relevant", dest="n_relevant", type=_positive_int, default=None,
                     help="relevant feature count")
    sim.add_argument("--task", choices=(REGRESSION, CLASSIFICATION), default=None,
                     help="response kind")
    sim.add_argument("--noise-mult", dest="noise_mult", type=float, default=None,
                     help="regression noise variance multiplier")
    sim.add_argument("--correlation", type=float, default=None,
                     help="latent equicorrelation (correlated-surrogate)")
    sim.add_argument("--seed", type=_seed, default=0, help="random seed")
    sim.add_argument("--out", default=".", help="output directory")
    sim.set_defaults(func=cmd_simulate)

    train = sub.add_parser("train", help="train a forest and serialize it to JSON")
    train.add_argument("--data", required=True, help="dataset CSV path")
    train.add_argument("--response", default=None, help="response column (raw CSV only)")
    train.add_argument("--task", choices=(REGRESSION, CLASSIFICATION), default=REGRESSION,
                       help="task for raw CSV files")
    train.add_argument("--categorical", default=None,
                       help="comma list of categorical columns (raw CSV only)")
    train.add_argument("--trees", type=_positive_int, default=100, help="number of trees")
    train.add_argument("--min-leaf", dest="min_leaf", type=_positive_int, default=1,
                       help="minimum weighted samples per leaf")
    train.add_argument("--max-depth", dest="max_depth", type=_positive_int, default=None,
                       help="depth cap (default unlimited)")
    train.add_argument("--mtry", type=_positive_int, default=None,
                       help="candidate features per node (default all)")
    train.add_argument("--sampling", type=_sampling, default=None,
                       help="bootstrap | subsample:<fraction>")
    train.add_argument("--allow-zero-gain-splits", action="store_true",
                       help="also split on zero impurity decrease")
    train.add_argument("--seed", type=_seed, default=0, help="random seed")
    train.add_argument("--workers", type=_positive_int, default=1, help="parallel workers")
    train.add_argument("--out", default=".", help="output directory")
    train.set_defaults(func=cmd_train)

    imp = sub.add_parser("importance", help="evaluate importance estimators on a forest")
    imp.add_argument("--forest", required=True, help="serialized forest JSON")
    imp.add_argument("--data", required=True, help="the forest's training CSV")
    imp.add_argument("--response", default=None, help="response column (raw CSV only)")
    imp.add_argument("--task", choices=(REGRESSION, CLASSIFICATION), default=REGRESSION,
                     help="task for raw CSV files")
    imp.add_argument("--categorical", default=None,
                     help="comma list of categorical columns (raw CSV only)")
    imp.add_argument("--methods", type=_methods, default=("mdi", "mdi-oob"),
                     help=f"comma list from: {', '.join(METHOD_NAMES)}")
    imp.add_argument("--n-repeats", dest="n_repeats", type=_positive_int, default=1,
                     help="permutation repeats for mda")
    imp.add_argument("--seed", type=_seed, default=0, help="random seed (mda)")
    imp.add_argument("--format", choices=("csv", "json"), default="csv", help="output format")
    imp.add_argument("--out", default=".", help="output directory")
    imp.set_defaults(func=cmd_importance)

    sweep = sub.add_parser("sweep", help="replicated sweep over leaf size or depth")
    sweep.add_argument("--config", default=None, help="config file or preset name")
    sweep.add_argument("--axis", choices=SWEEP_AXES, default=None, help="sweep axis")
    sweep.add_argument("--grid", type=_grid, default=None,
                       help="grid as 'lo:hi' or comma list")
    sweep.add_argument("--generator", choices=GENERATOR_NAMES, default=None,
                       help="dataset generator")
    sweep.add_argument("--n", type=_positive_int, default=None, help="rows per replicate")
    sweep.add_argument("--p", type=_positive_int, default=None, help="feature count")
    sweep.add_argument("--n-relevant", dest="n_relevant", type=_positive_int, default=None,
                       help="relevant feature count")
    sweep.add_argument("--task", choices=(REGRESSION, CLASSIFICATION), default=None,
                       help="generator task")
    sweep.add_argument("--noise-mult", dest="noise_mult", type=float, default=None,
                       help="regression noise variance multiplier")
    sweep.add_argument("--correlation", type=float, default=None,
                       help="latent equicorrelation (correlated-surrogate)")
    sweep.add_argument("--trees", type=_positive_int, default=None, help="trees per forest")
    sweep.add_argument("--mtry", type=_positive_int, default=None,
                       help="candidate features per node")
    sweep.add_argument("--method", choices=METHOD_NAMES, default=None,
                       help="importance estimator")
    sweep.add_argument("--replicates", type=_positive_int, default=None,
                       help="fresh datasets per grid value")
    sweep.add_argument("--n-repeats", dest="n_repeats", type=_positive_int, default=None,
                       help="permutation repeats for mda")
    sweep.add_argument("--seed", type=_seed, default=None, help="random seed")
    sweep.add_argument("--workers", type=_positive_int, default=None, help="parallel workers")
    sweep.add_argument("--out", default=".", help="output directory")
    sweep.set_defaults(func=cmd_sweep)

    bench = sub.add_parser("bench", help="run a replicated benchmark from a config")
    bench.add_argument("config", help="config file path or shipped preset name")
    bench.add_argument("--replicates", type=_positive_int, default=None,
                       help="override replicate count")
    bench.add_argument("--methods", type=_methods, default=None,
                       help=f"override methods: comma list from {', '.join(METHOD_NAMES)}")
    bench.add_argument("--fixed-relevant-set", action="store_true",
                       help="draw the relevant set once and reuse it across replicates")
    bench.add_argument("--seed", type=_seed, default=None, help="override seed")
    bench.add_argument("--workers", type=_positive_int, default=None,
                       help="override parallel workers")
    bench.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="report format")
    bench.add_argument("--out", default=".", help="output directory")
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (ConfigurationError, CsvParseError, OutOfBagError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
