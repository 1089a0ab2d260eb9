"""Load, validate, encode and split tabular datasets.

Supported inputs are comma-separated files (optional header, UTF-8, '.'
decimal separator) and sparse LibSVM files (``label idx:val ...``, 1-based
indices, densified on load).  A feature column is treated as categorical iff
any cell fails numeric parsing, and is one-hot expanded in first-appearance
order; multiclass labels are one-hot encoded the same way.  Missing cells are
rejected, never imputed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

TASKS = ("regression", "binary", "multiclass")


class DatasetError(ValueError):
    """Raised for malformed files or datasets violating task invariants."""


@dataclass(frozen=True)
class Dataset:
    """Dense sample container: features (n x p), labels (n x d) and a task kind.

    Invariants are checked on construction: matching row counts, finite
    values, and task-specific label shape (regression/binary have d=1 with
    binary labels in {0,1}; multiclass labels are one-hot rows over d >= 2
    classes).
    """

    features: np.ndarray
    labels: np.ndarray
    task: str
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.float64)
        if labels.ndim == 1:
            labels = labels.reshape(-1, 1)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2 or labels.ndim != 2:
            raise DatasetError("features and labels must be 2-d matrices")
        n, p = features.shape
        d = labels.shape[1]
        if n < 1 or p < 1 or d < 1:
            raise DatasetError(f"need n,p,d >= 1; got n={n}, p={p}, d={d}")
        if labels.shape[0] != n:
            raise DatasetError(
                f"features have {n} rows but labels have {labels.shape[0]}"
            )
        if not np.all(np.isfinite(features)):
            raise DatasetError("features contain NaN or Inf")
        if not np.all(np.isfinite(labels)):
            raise DatasetError("labels contain NaN or Inf")
        if self.task not in TASKS:
            raise DatasetError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.task == "regression" and d != 1:
            raise DatasetError(f"regression requires d=1, got d={d}")
        if self.task == "binary":
            if d != 1:
                raise DatasetError(f"binary requires d=1, got d={d}")
            if not np.all((labels == 0.0) | (labels == 1.0)):
                raise DatasetError("binary labels must all be 0 or 1")
        if self.task == "multiclass":
            if d < 2:
                raise DatasetError(f"multiclass requires d>=2, got d={d}")
            one = (labels == 1.0).sum(axis=1)
            if not (np.all((labels == 0.0) | (labels == 1.0)) and np.all(one == 1)):
                raise DatasetError("multiclass label rows must be one-hot")
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != p:
                raise DatasetError(
                    f"got {len(names)} feature names for {p} feature columns"
                )
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def d(self) -> int:
        return self.labels.shape[1]

    def label_indices(self) -> np.ndarray:
        """Class indices (multiclass argmax / binary 0-1) or raw regression values."""
        if self.task == "multiclass":
            return np.argmax(self.labels, axis=1)
        if self.task == "binary":
            return self.labels[:, 0].astype(np.int64)
        return self.labels[:, 0]


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic train/test split: fraction held out for test, plus a seed."""

    test_fraction: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


def _parse_number(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def _read_rows(path: str) -> list[list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DatasetError(f"{path}: empty file")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DatasetError(
                f"{path}: row {i + 1} has {len(row)} cells, expected {width}"
            )
    return rows


def _resolve_label_column(
    label_spec: str | int, header: list[str] | None, width: int, path: str
) -> int:
    if isinstance(label_spec, str):
        if header is None:
            raise DatasetError(
                f"{path}: label column given by name {label_spec!r} but file has no header"
            )
        try:
            return header.index(label_spec)
        except ValueError:
            raise DatasetError(f"{path}: label column {label_spec!r} missing") from None
    idx = int(label_spec)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise DatasetError(f"{path}: label column index {label_spec} out of range")
    return idx


def _encode_labels(cells: list[str], task: str, path: str, col: int) -> np.ndarray:
    if task in ("regression", "binary"):
        out = np.empty((len(cells), 1), dtype=np.float64)
        for i, cell in enumerate(cells):
            val = _parse_number(cell)
            if val is None:
                raise DatasetError(
                    f"{path}: row {i + 1}, column {col + 1}: cannot parse label {cell!r} as number"
                )
            out[i, 0] = val
        if task == "binary" and not np.all((out == 0.0) | (out == 1.0)):
            bad = out[(out != 0.0) & (out != 1.0)][0]
            raise DatasetError(f"{path}: binary label {bad} outside {{0, 1}}")
        return out
    # Multiclass: classes keyed by the raw cell text, first appearance first.
    classes: dict[str, int] = {}
    for cell in cells:
        if cell not in classes:
            classes[cell] = len(classes)
    if len(classes) < 2:
        raise DatasetError(
            f"{path}: multiclass task needs at least 2 distinct labels, found {len(classes)}"
        )
    out = np.zeros((len(cells), len(classes)), dtype=np.float64)
    for i, cell in enumerate(cells):
        out[i, classes[cell]] = 1.0
    return out


def _encode_features(
    columns: list[list[str]], names: list[str] | None, path: str, label_col: int
) -> tuple[np.ndarray, list[str] | None]:
    blocks: list[np.ndarray] = []
    out_names: list[str] | None = [] if names is not None else None
    for j, cells in enumerate(columns):
        file_col = j if j < label_col else j + 1
        for i, cell in enumerate(cells):
            if cell.strip() == "":
                raise DatasetError(
                    f"{path}: row {i + 1}, column {file_col + 1}: missing value"
                )
        parsed = [_parse_number(cell) for cell in cells]
        name = names[j] if names is not None else f"f{file_col}"
        if all(v is not None for v in parsed):
            blocks.append(np.asarray(parsed, dtype=np.float64).reshape(-1, 1))
            if out_names is not None:
                out_names.append(name)
        else:
            # Categorical: one-hot in first-appearance order, in place.
            cats: dict[str, int] = {}
            for cell in cells:
                if cell not in cats:
                    cats[cell] = len(cats)
            block = np.zeros((len(cells), len(cats)), dtype=np.float64)
            for i, cell in enumerate(cells):
                block[i, cats[cell]] = 1.0
            blocks.append(block)
            if out_names is not None:
                out_names.extend(f"{name}={cat}" for cat in cats)
    return np.hstack(blocks), out_names


def load_csv(
    path: str,
    label_spec: str | int,
    task: str,
    has_header: bool = True,
) -> Dataset:
    """Load a CSV file into a validated Dataset.

    ``label_spec`` selects the label column by header name or by (possibly
    negative) position.  Categorical feature columns and multiclass labels
    are one-hot encoded in first-appearance order.
    """
    rows = _read_rows(path)
    header = rows[0] if has_header else None
    data_rows = rows[1:] if has_header else rows
    if not data_rows:
        raise DatasetError(f"{path}: no data rows")
    width = len(rows[0])
    label_col = _resolve_label_column(label_spec, header, width, path)
    label_cells = [row[label_col] for row in data_rows]
    for i, cell in enumerate(label_cells):
        if cell.strip() == "":
            raise DatasetError(f"{path}: row {i + 1}, column {label_col + 1}: missing label")
    feature_columns = [
        [row[j] for row in data_rows] for j in range(width) if j != label_col
    ]
    if not feature_columns:
        raise DatasetError(f"{path}: no feature columns besides the label")
    feature_header = (
        [header[j] for j in range(width) if j != label_col] if header else None
    )
    labels = _encode_labels(label_cells, task, path, label_col)
    features, names = _encode_features(feature_columns, feature_header, path, label_col)
    return Dataset(
        features=features,
        labels=labels,
        task=task,
        feature_names=tuple(names) if names is not None else None,
    )


def load_libsvm(path: str, task: str, n_features: int | None = None) -> Dataset:
    """Load a sparse LibSVM file (1-based feature indices), densified.

    ``n_features`` pads the matrix when the file's max index undershoots the
    true dimension.
    """
    labels_raw: list[str] = []
    entries: list[list[tuple[int, float]]] = []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            labels_raw.append(parts[0])
            row: list[tuple[int, float]] = []
            for item in parts[1:]:
                try:
                    idx_s, val_s = item.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise DatasetError(
                        f"{path}: line {lineno}: cannot parse entry {item!r}"
                    ) from None
                if idx < 1:
                    raise DatasetError(f"{path}: line {lineno}: feature index {idx} < 1")
                row.append((idx - 1, val))
                max_idx = max(max_idx, idx)
            entries.append(row)
    if not entries:
        raise DatasetError(f"{path}: empty file")
    p = max(max_idx, n_features or 0)
    if p < 1:
        raise DatasetError(f"{path}: no feature entries")
    features = np.zeros((len(entries), p), dtype=np.float64)
    for i, row in enumerate(entries):
        for j, val in row:
            features[i, j] = val
    labels = _encode_labels(labels_raw, task, path, 0)
    return Dataset(features=features, labels=labels, task=task)


def write_csv(data: Dataset, path: str) -> None:
    """Canonical writer: numeric features, label column last.

    Multiclass labels are written as class indices; floats use shortest
    round-trip decimals, so load/write/load is an identity on the Dataset.
    """
    label_out: list[str]
    if data.task == "multiclass":
        label_out = [str(int(i)) for i in np.argmax(data.labels, axis=1)]
    else:
        label_out = [repr(float(v)) for v in data.labels[:, 0]]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if data.feature_names is not None:
            writer.writerow(list(data.feature_names) + ["label"])
        for i in range(data.n):
            writer.writerow([repr(float(v)) for v in data.features[i]] + [label_out[i]])


def train_test_split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Deterministic disjoint partition; test gets floor(n * fraction), min 1.

    Fractions allocating less than one full row to the train side are
    rejected before rounding, so e.g. n=2 with test_fraction=0.9 errors.
    """
    n = data.n
    alloc = n * spec.test_fraction
    if alloc > n - 1:
        raise DatasetError(
            f"test_fraction {spec.test_fraction} leaves an empty train side for n={n}"
        )
    # nudge products like 10 * 0.3 = 2.999... back onto their integer boundary
    n_test = max(1, int(np.floor(alloc + 1e-9)))
    n_train = n - n_test
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    perm = rng.permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return _take(data, train_idx), _take(data, test_idx)


def _take(data: Dataset, idx: np.ndarray) -> Dataset:
    return Dataset(
        features=data.features[idx],
        labels=data.labels[idx],
        task=data.task,
        feature_names=data.feature_names,
    )
