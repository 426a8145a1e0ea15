"""Numeric table with a missingness mask and CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DataError",
    "Dataset",
    "load_csv",
    "write_csv",
    "column_stats",
    "NA_TOKENS",
]

NA_TOKENS = frozenset({"", "na"})


class DataError(ValueError):
    """Raised for malformed input tables."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``n x p`` float table; ``mask`` is True where a cell is observed.

    Unobserved cells hold NaN and must never be read; consumers branch on
    ``mask``.  The target column lives in ``values`` like any other column.
    """

    values: np.ndarray
    mask: np.ndarray
    col_names: tuple
    target_idx: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 2 or values.shape != mask.shape:
            raise DataError("values and mask must be matching 2-d arrays")
        n, p = values.shape
        if n < 1 or p < 2:
            raise DataError(f"need n >= 1 and p >= 2, got {values.shape}")
        if len(self.col_names) != p:
            raise DataError("col_names length does not match column count")
        if len(set(self.col_names)) != p:
            raise DataError("column names must be unique")
        if not 0 <= self.target_idx < p:
            raise DataError("target_idx out of range")
        empty = np.flatnonzero(~mask.any(axis=0))
        if empty.size:
            raise DataError(f"column {self.col_names[empty[0]]!r} has no observed values")
        values[~mask] = np.nan
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "col_names", tuple(str(c) for c in self.col_names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def feature_idx(self) -> np.ndarray:
        return np.array([j for j in range(self.p) if j != self.target_idx])

    @property
    def feature_names(self) -> tuple:
        return tuple(self.col_names[j] for j in self.feature_idx)

    @property
    def complete(self) -> bool:
        return bool(self.mask.all())

    def X(self) -> np.ndarray:
        """Feature matrix; only valid on fully observed data."""
        self._require_complete()
        return self.values[:, self.feature_idx]

    def y(self) -> np.ndarray:
        return self.values[:, self.target_idx]

    def _require_complete(self):
        if not self.complete:
            raise DataError("operation requires a fully observed Dataset")

    def with_mask(self, mask: np.ndarray) -> "Dataset":
        mask = np.asarray(mask, dtype=bool)
        if (mask & ~self.mask).any():
            raise DataError("cannot un-mask cells that are not observed")
        return Dataset(self.values, mask, self.col_names, self.target_idx, dict(self.meta))

    def with_values(self, values: np.ndarray) -> "Dataset":
        """Fully observed copy with ``values``; observed cells must be unchanged."""
        values = np.asarray(values, dtype=np.float64)
        if np.isnan(values).any():
            raise DataError("completed values contain NaN")
        if not np.array_equal(values[self.mask], self.values[self.mask]):
            raise DataError("observed cells were modified")
        return Dataset(values, np.ones_like(self.mask), self.col_names, self.target_idx,
                       dict(self.meta))

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.values[rows], self.mask[rows], self.col_names, self.target_idx,
                       dict(self.meta))


def _parse_cell(text: str, row: int, col: str) -> float:
    token = text.strip()
    if token.lower() in NA_TOKENS:
        return np.nan
    try:
        return float(token)
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: cannot parse {text!r} as a number") from None


def load_csv(path, delimiter: str = ",", target_name: str | None = None) -> Dataset:
    """Read a numeric CSV with a header row.

    Empty cells and ``NA`` (any case) are missing.  When ``target_name`` is
    None the last column is the target.  Parse errors name the file line
    (the header is line 1) and the column.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    if target_name is None:
        target_idx = len(header) - 1
    elif target_name in header:
        target_idx = header.index(target_name)
    else:
        raise DataError(f"target {target_name!r} not in header {header}")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"row {i + 2}: expected {len(header)} cells, found {len(row)}")
        for j, cell in enumerate(row):
            values[i, j] = _parse_cell(cell, i + 2, header[j])
    mask = ~np.isnan(values)
    return Dataset(values, mask, tuple(header), target_idx, {"source": str(path)})


def write_csv(d: Dataset, path, delimiter: str = ",") -> None:
    """Write ``d``; masked cells are written as ``NA``.  ``repr`` keeps floats exact."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(d.col_names)
        for vals, obs in zip(d.values, d.mask):
            w.writerow([repr(float(v)) if o else "NA" for v, o in zip(vals, obs)])


def column_stats(d: Dataset) -> list[dict]:
    """Mean, sd (ddof=0) and missing rate of every column over observed cells."""
    out = []
    for j, name in enumerate(d.col_names):
        col = d.values[d.mask[:, j], j]
        out.append({
            "name": name,
            "mean": float(col.mean()),
            "sd": float(col.std()),
            "missing_rate": 1.0 - col.size / d.n,
        })
    return out
