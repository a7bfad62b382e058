"""Tabular data ingestion and column bookkeeping.

A :class:`Dataset` holds the outcome ``y``, the full regressor matrix ``X``
and the positions of the target columns inside ``X``. Everything that is not
a target is a control. The intercept is never stored as a column; the
solvers add it themselves.
"""

from __future__ import annotations

import csv
import fnmatch
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

_WILDCARDS = set("*?[")


@dataclass(frozen=True)
class Standardization:
    """Column means and root-mean-square scales of the centered columns."""

    means: np.ndarray
    scales: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardization":
        means = X.mean(axis=0)
        scales = np.sqrt(((X - means) ** 2).mean(axis=0))
        if np.any(scales <= 0):
            bad = np.flatnonzero(scales <= 0).tolist()
            raise DataError(f"columns {bad} have zero variance; run drop_constants first")
        return cls(means=means, scales=scales)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.means) / self.scales

    def invert(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.scales + self.means


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Outcome, regressors and target bookkeeping.

    ``target_index`` holds 0-based column positions into ``X`` in the order
    the targets are reported.
    """

    y: np.ndarray
    X: np.ndarray
    column_names: tuple[str, ...]
    target_index: tuple[int, ...]
    outcome_name: str = "y"
    dropped: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        y = _readonly(self.y).reshape(-1)
        X = _readonly(self.X)
        if X.ndim == 1:
            X = _readonly(X.reshape(-1, 1))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "column_names", tuple(str(c) for c in self.column_names))
        object.__setattr__(self, "target_index", tuple(int(k) for k in self.target_index))

        n, p = X.shape
        if y.shape[0] != n:
            raise DataError(f"outcome has {y.shape[0]} rows but X has {n}")
        if n < 2:
            raise DataError("need at least 2 observations")
        if p < 1:
            raise DataError("need at least 1 regressor")
        if len(self.column_names) != p:
            raise DataError(f"{len(self.column_names)} column names for {p} columns")
        if len(set(self.column_names)) != p:
            raise DataError("column names must be unique")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
            raise DataError("data contain NaN or infinite values")
        K = len(self.target_index)
        if K < 1:
            raise DataError("at least one target column is required")
        if len(set(self.target_index)) != K:
            raise DataError("target_index entries must be distinct")
        if min(self.target_index) < 0 or max(self.target_index) >= p:
            raise DataError("target_index out of range")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def K(self) -> int:
        return len(self.target_index)

    @property
    def target_names(self) -> list[str]:
        return [self.column_names[k] for k in self.target_index]

    @property
    def control_index(self) -> list[int]:
        targets = set(self.target_index)
        return [j for j in range(self.p) if j not in targets]

    @cached_property
    def standardization(self) -> Standardization:
        return Standardization.fit(self.X)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.X[:, self.column_names.index(name)]
        except ValueError:
            raise DataError(f"no column named {name!r}") from None


def match_columns(names: Sequence[str], targets: str | Iterable[str]) -> list[int]:
    """Resolve target specifications to column positions in file order.

    Each entry is either an exact column name or a shell-style pattern
    (``fem*``). A single string may hold several comma-separated entries.
    """
    if isinstance(targets, str):
        specs = [t.strip() for t in targets.split(",") if t.strip()]
    else:
        specs = [str(t) for t in targets]
    if not specs:
        raise DataError("empty target specification")
    chosen: set[int] = set()
    for item in specs:
        if _WILDCARDS & set(item):
            hits = [j for j, c in enumerate(names) if fnmatch.fnmatchcase(c, item)]
        else:
            hits = [j for j, c in enumerate(names) if c == item]
        if not hits:
            raise DataError(f"target pattern {item!r} matches no column")
        chosen.update(hits)
    return sorted(chosen)


def load_csv(path: str | Path, outcome: str, targets: str | Iterable[str] | None = None) -> Dataset:
    """Read a numeric CSV file with one header row.

    ``X`` is every column except ``outcome``. When ``targets`` is ``None``
    all regressors are targets.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            values = []
            for col, cell in zip(header, row):
                cell = cell.strip()
                try:
                    v = float(cell)
                except ValueError:
                    what = "blank cell" if cell == "" else f"non-numeric value {cell!r}"
                    raise DataError(f"{path}: row {lineno}, column {col!r}: {what}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {lineno}, column {col!r}: non-finite value {cell!r}")
                values.append(v)
            rows.append(values)

    if outcome not in header:
        raise DataError(f"outcome column {outcome!r} not found in {path}")
    if not rows:
        raise DataError(f"{path} has no data rows")
    table = np.asarray(rows, dtype=np.float64)
    j_y = header.index(outcome)
    names = [h for j, h in enumerate(header) if j != j_y]
    X = np.delete(table, j_y, axis=1)
    index = list(range(len(names))) if targets is None else match_columns(names, targets)
    return Dataset(y=table[:, j_y], X=X, column_names=names, target_index=index, outcome_name=outcome)


def write_csv(data: Dataset, path: str | Path) -> None:
    """Write ``data`` as CSV, outcome first, with round-trip exact decimals."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([data.outcome_name, *data.column_names])
        for yi, row in zip(data.y, data.X):
            w.writerow([format(float(v), ".17g") for v in (yi, *row)])


def build_interactions(data: Dataset, focal: str, partners: Sequence[str]) -> Dataset:
    """Append ``focal * partner`` columns named ``"<focal>:<partner>"``.

    The new columns become targets when ``focal`` is itself a target.
    """
    if focal not in data.column_names:
        raise DataError(f"no column named {focal!r}")
    f = data.column(focal)
    new_names, new_cols = [], []
    for partner in partners:
        x = data.column(partner)
        name = f"{focal}:{partner}"
        if name in data.column_names or name in new_names:
            raise DataError(f"column {name!r} already exists")
        new_names.append(name)
        new_cols.append(f * x)
    if not new_cols:
        return data
    X = np.column_stack([data.X, *new_cols])
    index = list(data.target_index)
    if data.column_names.index(focal) in data.target_index:
        index.extend(range(data.p, data.p + len(new_cols)))
    return Dataset(
        y=data.y,
        X=X,
        column_names=(*data.column_names, *new_names),
        target_index=index,
        outcome_name=data.outcome_name,
    )


def constant_columns(X: np.ndarray) -> np.ndarray:
    """Boolean mask of columns whose entries are all identical."""
    return np.all(X == X[:1], axis=0)


def drop_constants(data: Dataset) -> Dataset:
    """Remove zero-variance columns and remap the target positions.

    The names of removed columns are kept in ``Dataset.dropped``.
    """
    const = constant_columns(data.X)
    if not const.any():
        return data
    if const.all():
        raise DataError("all regressors are constant; nothing left to fit")
    removed = [c for c, k in zip(data.column_names, const) if k]
    lost_targets = [data.column_names[k] for k in data.target_index if const[k]]
    if lost_targets:
        warnings.warn(f"dropping constant target columns: {', '.join(lost_targets)}", stacklevel=2)
    logger.info("dropping %d constant columns: %s", len(removed), removed)

    keep = np.flatnonzero(~const)
    remap = {int(old): new for new, old in enumerate(keep)}
    index = [remap[k] for k in data.target_index if k in remap]
    if not index:
        raise DataError("every target column is constant")
    return Dataset(
        y=data.y,
        X=data.X[:, keep],
        column_names=[data.column_names[j] for j in keep],
        target_index=index,
        outcome_name=data.outcome_name,
        dropped=(*data.dropped, *removed),
    )
