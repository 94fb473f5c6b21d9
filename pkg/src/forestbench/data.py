"""Dataset container, CSV ingestion, preprocessing transforms, and
bootstrap/subsample drawing with out-of-bag tracking."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, CsvParseError
from .rng import Rng

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass(frozen=True)
class FeatureKind:
    """Numeric feature, or categorical feature with a known category count."""

    kind: str  # "numeric" | "categorical"
    categories: int | None = None

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise ConfigurationError(f"unknown feature kind {self.kind!r}")
        if self.kind == "categorical" and (self.categories is None or self.categories < 2):
            raise ConfigurationError("categorical features need >= 2 categories")
        if self.kind == "numeric" and self.categories is not None:
            raise ConfigurationError("numeric features carry no category count")

    @staticmethod
    def numeric() -> "FeatureKind":
        return FeatureKind("numeric")

    @staticmethod
    def categorical(categories: int) -> "FeatureKind":
        return FeatureKind("categorical", categories)

    def to_string(self) -> str:
        return "numeric" if self.kind == "numeric" else f"categorical({self.categories})"

    @staticmethod
    def from_string(text: str) -> "FeatureKind":
        if text == "numeric":
            return FeatureKind.numeric()
        if text.startswith("categorical(") and text.endswith(")"):
            return FeatureKind.categorical(int(text[len("categorical("):-1]))
        raise ConfigurationError(f"cannot parse feature kind {text!r}")


def feature_name(index: int) -> str:
    """Display name for a 0-indexed feature column ('X1' for column 0)."""
    return f"X{index + 1}"


@dataclass(frozen=True)
class Dataset:
    """Immutable n x p feature matrix plus response column.

    Categorical features are stored as ordered integer codes and split with
    thresholds like any numeric column.  Classification responses are integer
    labels in ``0..n_classes-1``.
    """

    features: np.ndarray
    response: np.ndarray
    task: str
    feature_kinds: tuple[FeatureKind, ...]
    n_classes: int | None = None
    relevant_set: frozenset[int] | None = None

    def __post_init__(self):
        features = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "features", features)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ConfigurationError("features must be a non-empty 2-d matrix")
        if not np.all(np.isfinite(features)):
            raise ConfigurationError("feature values must all be finite")
        n, p = features.shape
        if self.task == REGRESSION:
            response = np.asarray(self.response, dtype=np.float64)
            if self.n_classes is not None:
                raise ConfigurationError("regression datasets carry no class count")
            if not np.all(np.isfinite(response)):
                raise ConfigurationError("regression responses must be finite")
        elif self.task == CLASSIFICATION:
            response = np.asarray(self.response, dtype=np.int64)
            if self.n_classes is None or self.n_classes < 2:
                raise ConfigurationError("classification needs n_classes >= 2")
            if response.size and (response.min() < 0 or response.max() >= self.n_classes):
                raise ConfigurationError(
                    f"class labels must lie in 0..{self.n_classes - 1}"
                )
        else:
            raise ConfigurationError(f"unknown task {self.task!r}")
        if response.shape != (n,):
            raise ConfigurationError("response length must match the feature rows")
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "feature_kinds", tuple(self.feature_kinds))
        if len(self.feature_kinds) != p:
            raise ConfigurationError("feature_kinds must have one entry per column")
        if self.relevant_set is not None:
            rel = frozenset(int(k) for k in self.relevant_set)
            if any(k < 0 or k >= p for k in rel):
                raise ConfigurationError("relevant_set contains out-of-range indices")
            object.__setattr__(self, "relevant_set", rel)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return [feature_name(k) for k in range(self.p)]

    def noisy_set(self) -> frozenset[int]:
        if self.relevant_set is None:
            raise ConfigurationError("dataset records no relevant feature set")
        return frozenset(range(self.p)) - self.relevant_set

    def fingerprint(self) -> str:
        """Content hash binding trained trees to their training data."""
        h = hashlib.sha256()
        h.update(f"{self.task}|{self.n}|{self.p}|{self.n_classes}".encode())
        h.update(self.features.tobytes())
        h.update(np.ascontiguousarray(self.response).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class SampleSplit:
    """Per-tree in-bag multiplicities and the complementary OOB index set."""

    inbag: np.ndarray
    oob: np.ndarray = field(init=False)

    def __post_init__(self):
        inbag = np.asarray(self.inbag, dtype=np.int64)
        if inbag.ndim != 1 or np.any(inbag < 0):
            raise ConfigurationError("inbag must be 1-d non-negative counts")
        object.__setattr__(self, "inbag", inbag)
        object.__setattr__(self, "oob", np.flatnonzero(inbag == 0))

    @property
    def n(self) -> int:
        return self.inbag.shape[0]

    @property
    def total_weight(self) -> int:
        return int(self.inbag.sum())


def draw_sample(n: int, mode: str, rng: Rng, fraction: float | None = None) -> SampleSplit:
    """Draw a bootstrap (with replacement) or subsample (without) of size n.

    Subsampling takes ``ceil(fraction * n)`` distinct rows; the OOB set is
    whatever received zero draws.
    """
    if n < 1:
        raise ConfigurationError("need at least one sample to draw from")
    if mode == "bootstrap":
        picks = rng.integers(0, n, size=n)
        inbag = np.bincount(picks, minlength=n)
    elif mode == "subsample":
        if fraction is None or not 0.0 < fraction <= 1.0:
            raise ConfigurationError("subsample fraction must lie in (0, 1]")
        size = math.ceil(fraction * n)
        chosen = rng.choice(n, size=size, replace=False)
        inbag = np.zeros(n, dtype=np.int64)
        inbag[chosen] = 1
    else:
        raise ConfigurationError(f"unknown sampling mode {mode!r}")
    return SampleSplit(inbag=inbag)


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Encode integer labels as rows of an n x D indicator matrix."""
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes < 1:
        raise ConfigurationError("n_classes must be >= 1")
    bad = np.flatnonzero((labels < 0) | (labels >= n_classes))
    if bad.size:
        raise ConfigurationError(
            f"label {labels[bad[0]]} at row {int(bad[0])} outside 0..{n_classes - 1}"
        )
    out = np.zeros((labels.shape[0], n_classes), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def response_matrix(dataset: Dataset) -> np.ndarray:
    """Response as an (n, D) matrix: one column for regression, one-hot rows
    for classification (the representation all tree math runs on)."""
    if dataset.task == REGRESSION:
        return dataset.response.reshape(-1, 1)
    return one_hot(dataset.response, dataset.n_classes)


def scale_unit_interval(dataset: Dataset) -> Dataset:
    """Affinely map every feature onto [0, 1]; constant columns become zeros
    (with a warning) rather than failing."""
    features = dataset.features.copy()
    lo = features.min(axis=0)
    hi = features.max(axis=0)
    span = hi - lo
    constant = span == 0.0
    for k in np.flatnonzero(constant):
        warnings.warn(
            f"feature {feature_name(int(k))} is constant; scaled to all zeros",
            stacklevel=2,
        )
    safe = np.where(constant, 1.0, span)
    features = (features - lo) / safe
    features[:, constant] = 0.0
    return replace(dataset, features=features)


def permute_noisy_features(dataset: Dataset, relevant, rng: Rng) -> Dataset:
    """Independently shuffle every column outside ``relevant``, breaking its
    dependence on the response and on the kept columns."""
    relevant = frozenset(int(k) for k in relevant)
    if any(k < 0 or k >= dataset.p for k in relevant):
        raise ConfigurationError("relevant indices out of range")
    features = dataset.features.copy()
    for k in range(dataset.p):
        if k in relevant:
            continue
        order = rng.permutation(dataset.n)
        features[:, k] = features[order, k]
    return replace(dataset, features=features, relevant_set=relevant)


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------


def _parse_numeric(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise CsvParseError(
            f"non-numeric value {cell!r} at row {row}, column {column!r}"
        ) from None
    if not math.isfinite(value):
        raise CsvParseError(f"non-finite value {cell!r} at row {row}, column {column!r}")
    return value


def load_csv(
    path,
    response: str,
    task: str,
    categorical: tuple[str, ...] = (),
    relevant: tuple[str, ...] | None = None,
    classes: tuple[str, ...] | None = None,
) -> Dataset:
    """Read a headered, comma-separated UTF-8 file into a Dataset.

    ``response`` names the response column; ``categorical`` columns are
    integer-encoded by first appearance; classification labels are either
    checked against ``classes`` or encoded by first appearance.
    """
    path = Path(path)
    if not path.exists():
        raise CsvParseError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: empty file, header row required") from None
        rows = list(reader)
    if response not in header:
        raise CsvParseError(f"{path}: response column {response!r} not in header")
    if not rows:
        raise CsvParseError(f"{path}: no data rows")
    unknown = set(categorical) - set(header)
    if unknown:
        raise CsvParseError(f"{path}: categorical columns not in header: {sorted(unknown)}")

    feature_columns = [name for name in header if name != response]
    response_idx = header.index(response)
    categorical = tuple(categorical)

    n, p = len(rows), len(feature_columns)
    features = np.empty((n, p), dtype=np.float64)
    raw_response: list[str] = []
    encoders: dict[str, dict[str, int]] = {name: {} for name in categorical}

    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise CsvParseError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        j = 0
        for col_idx, name in enumerate(header):
            cell = row[col_idx].strip()
            if col_idx == response_idx:
                raw_response.append(cell)
                continue
            if name in categorical:
                codes = encoders[name]
                if cell not in codes:
                    codes[cell] = len(codes)
                features[i - 1, j] = codes[cell]
            else:
                features[i - 1, j] = _parse_numeric(cell, i, name)
            j += 1

    if task == REGRESSION:
        response_values = np.array(
            [_parse_numeric(cell, i, response) for i, cell in enumerate(raw_response, start=1)]
        )
        n_classes = None
    else:
        if classes is not None:
            label_codes = {label: d for d, label in enumerate(classes)}
        elif all(cell.isdigit() for cell in raw_response):
            # Already integer-coded labels keep their values, so a written
            # dataset reloads with identical label assignments.
            label_codes = {str(d): d for d in range(max(int(c) for c in raw_response) + 1)}
        else:
            label_codes = {}
            for cell in raw_response:
                if cell not in label_codes:
                    label_codes[cell] = len(label_codes)
        encoded = []
        for i, cell in enumerate(raw_response, start=1):
            if cell not in label_codes:
                raise CsvParseError(
                    f"unknown label {cell!r} at row {i}, column {response!r}"
                )
            encoded.append(label_codes[cell])
        response_values = np.array(encoded, dtype=np.int64)
        n_classes = len(label_codes)
        if n_classes < 2:
            raise CsvParseError(f"{path}: classification needs >= 2 distinct labels")

    kinds = tuple(
        FeatureKind.categorical(max(2, len(encoders[name])))
        if name in categorical
        else FeatureKind.numeric()
        for name in feature_columns
    )
    relevant_set = None
    if relevant is not None:
        missing = [name for name in relevant if name not in feature_columns]
        if missing:
            raise CsvParseError(f"{path}: relevant columns not in header: {missing}")
        relevant_set = frozenset(feature_columns.index(name) for name in relevant)
    return Dataset(
        features=features,
        response=response_values,
        task=task,
        feature_kinds=kinds,
        n_classes=n_classes,
        relevant_set=relevant_set,
    )


def write_dataset_csv(dataset: Dataset, path, sidecar: bool = True) -> None:
    """Write features plus a trailing response column 'y'; a sidecar JSON file
    records task, feature kinds, and the relevant set so the CSV reloads
    losslessly via :func:`read_dataset_csv`."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.feature_names + ["y"])
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.features[i]]
            if dataset.task == REGRESSION:
                row.append(repr(float(dataset.response[i])))
            else:
                row.append(str(int(dataset.response[i])))
            writer.writerow(row)
    if sidecar:
        meta = {
            "schema_version": 1,
            "task": dataset.task,
            "n_classes": dataset.n_classes,
            "feature_kinds": [k.to_string() for k in dataset.feature_kinds],
            "relevant_set": sorted(dataset.relevant_set) if dataset.relevant_set is not None else None,
        }
        path.with_suffix(path.suffix + ".meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def read_dataset_csv(path) -> Dataset:
    """Load a CSV written by :func:`write_dataset_csv`, using its sidecar."""
    path = Path(path)
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    if not meta_path.exists():
        raise CsvParseError(f"missing sidecar metadata {meta_path}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    dataset = load_csv(path, response="y", task=meta["task"])
    kinds = tuple(FeatureKind.from_string(text) for text in meta["feature_kinds"])
    relevant = meta.get("relevant_set")
    return replace(
        dataset,
        feature_kinds=kinds,
        relevant_set=frozenset(relevant) if relevant is not None else None,
    )
