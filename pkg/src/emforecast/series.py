"""Annual series containers, differencing with exact inversion, lag framing and splits."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataFormatError, DegenerateInputError, InversionMismatchError

CSV_HEADER = ("year", "co2_per_capita", "gas_twh", "coal_twh", "oil_twh")
TARGET_COLUMN = "co2_per_capita"
FEATURE_COLUMNS = ("gas_twh", "coal_twh", "oil_twh")
DISPLAY_NAMES = {"co2_per_capita": "CO2", "gas_twh": "Gas", "coal_twh": "Coal", "oil_twh": "Oil"}


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    name: str
    start_year: int
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.size < 1:
            raise DegenerateInputError(f"series {self.name!r} is empty")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise DegenerateInputError(
                f"series {self.name!r} has a non-finite value at year {self.start_year + bad}"
            )
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "start_year", int(self.start_year))

    def __len__(self) -> int:
        return self.values.size

    @property
    def years(self) -> np.ndarray:
        return np.arange(self.start_year, self.start_year + len(self), dtype=np.int64)

    @property
    def end_year(self) -> int:
        return self.start_year + len(self) - 1

    def window(self, start: int, stop: int | None = None) -> "TimeSeries":
        """Positional slice ``values[start:stop]`` with the year label carried along."""
        start = int(start)
        if start < 0:
            start += len(self)
        return TimeSeries(self.name, self.start_year + start, self.values[start:stop])

    def with_values(self, values, start_year: int | None = None) -> "TimeSeries":
        return TimeSeries(self.name, self.start_year if start_year is None else start_year, values)


@dataclass(frozen=True)
class Dataset:
    target: TimeSeries
    features: tuple[TimeSeries, ...] = ()

    def __post_init__(self):
        feats = tuple(self.features)
        object.__setattr__(self, "features", feats)
        names = [f.name for f in feats]
        if len(set(names)) != len(names):
            raise ValueError(f"feature names must be unique, got {names}")
        if self.target.name in names:
            raise ValueError("target name collides with a feature name")
        for f in feats:
            if f.start_year != self.target.start_year or len(f) != len(self.target):
                raise ValueError(
                    f"feature {f.name!r} spans {f.start_year}..{f.end_year}, "
                    f"target spans {self.target.start_year}..{self.target.end_year}"
                )

    def __len__(self) -> int:
        return len(self.target)

    @property
    def start_year(self) -> int:
        return self.target.start_year

    @property
    def end_year(self) -> int:
        return self.target.end_year

    @property
    def years(self) -> np.ndarray:
        return self.target.years

    @property
    def columns(self) -> tuple[TimeSeries, ...]:
        return (self.target,) + self.features

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def matrix(self) -> np.ndarray:
        """(n, 1 + k) array, target in column 0."""
        return np.column_stack([c.values for c in self.columns])

    def column(self, name: str) -> TimeSeries:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def window(self, start: int, stop: int | None = None) -> "Dataset":
        return Dataset(self.target.window(start, stop), tuple(f.window(start, stop) for f in self.features))

    def year_index(self, year: int) -> int:
        idx = int(year) - self.start_year
        if not 0 <= idx < len(self):
            raise IndexError(f"year {year} outside {self.start_year}..{self.end_year}")
        return idx

    @classmethod
    def from_matrix(cls, names: Sequence[str], start_year: int, matrix) -> "Dataset":
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim == 1:
            m = m[:, None]
        cols = [TimeSeries(n, start_year, m[:, j]) for j, n in enumerate(names)]
        return cls(cols[0], tuple(cols[1:]))


@dataclass(frozen=True)
class LedgerEntry:
    name: str
    diff_order: int
    retained_heads: tuple[float, ...] = ()

    def __post_init__(self):
        if self.diff_order < 0:
            raise ValueError("diff_order must be >= 0")
        object.__setattr__(self, "retained_heads", tuple(float(v) for v in self.retained_heads))


@dataclass(frozen=True)
class TransformLedger:
    entries: Mapping[str, LedgerEntry] = field(default_factory=dict)
    source_start_year: int = 0

    @property
    def trim(self) -> int:
        return max((e.diff_order for e in self.entries.values()), default=0)

    def order(self, name: str) -> int:
        return self.entries[name].diff_order

    def __getitem__(self, name: str) -> LedgerEntry:
        return self.entries[name]

    def to_dict(self) -> dict:
        return {
            "source_start_year": self.source_start_year,
            "columns": [
                {"column": e.name, "diff_order": e.diff_order, "retained_heads": list(e.retained_heads)}
                for e in self.entries.values()
            ],
        }


@dataclass(frozen=True)
class SupervisedMatrix:
    X: np.ndarray
    y: np.ndarray
    row_years: np.ndarray
    feature_names: tuple[str, ...]
    lags: int

    def __len__(self) -> int:
        return self.y.size

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def rows_where(self, mask) -> "SupervisedMatrix":
        mask = np.asarray(mask)
        return SupervisedMatrix(self.X[mask], self.y[mask], self.row_years[mask], self.feature_names, self.lags)

    def before(self, year: int) -> "SupervisedMatrix":
        return self.rows_where(self.row_years < year)

    def row_for_year(self, year: int) -> np.ndarray:
        hit = np.flatnonzero(self.row_years == year)
        if hit.size == 0:
            raise IndexError(f"no supervised row for year {year}")
        return self.X[hit[0]]


# --------------------------------------------------------------------------- differencing

def difference(series: TimeSeries, order: int = 1) -> tuple[TimeSeries, tuple[float, ...]]:
    if order < 1:
        raise ValueError("order must be >= 1")
    if len(series) <= order:
        raise DegenerateInputError(
            f"cannot difference {series.name!r} of length {len(series)} {order} time(s)"
        )
    heads = tuple(float(v) for v in series.values[:order])
    out = np.diff(series.values, n=order)
    return TimeSeries(series.name, series.start_year + order, out), heads


def _head_chain(heads: Sequence[float]) -> list[float]:
    """First value of each intermediate difference level 0..order-1."""
    h = np.asarray(heads, dtype=np.float64)
    return [float(np.diff(h, n=k)[0]) for k in range(h.size)]


def invert_difference(diffed: TimeSeries, entry: LedgerEntry) -> TimeSeries:
    order = entry.diff_order
    if len(entry.retained_heads) != order:
        raise InversionMismatchError(
            f"ledger for {entry.name!r} records order {order} but {len(entry.retained_heads)} head(s)"
        )
    if entry.name != diffed.name:
        raise InversionMismatchError(f"ledger entry {entry.name!r} applied to series {diffed.name!r}")
    if order == 0:
        return diffed
    values = np.asarray(diffed.values, dtype=np.float64)
    for head in reversed(_head_chain(entry.retained_heads)):
        values = np.concatenate(([head], head + np.cumsum(values)))
    return TimeSeries(diffed.name, diffed.start_year - order, values)


def restore_levels(diffs, history_tail, order: int) -> np.ndarray:
    """Rebuild future levels from predicted ``order``-th differences.

    ``history_tail`` holds at least the last ``order`` observed levels. Each
    reconstructed level is fed back as history for the next step, so this
    serves both the one-step case (one diff) and recursive paths.
    """
    diffs = np.asarray(diffs, dtype=np.float64).reshape(-1)
    if order == 0:
        return diffs.copy()
    hist = list(np.asarray(history_tail, dtype=np.float64)[-order:])
    if len(hist) < order:
        raise InversionMismatchError(f"need {order} trailing level(s), got {len(hist)}")
    coefs = [comb(order, k) * (-1) ** (k + 1) for k in range(1, order + 1)]
    out = np.empty_like(diffs)
    for i, d in enumerate(diffs):
        level = d + sum(c * hist[-k] for k, c in enumerate(coefs, start=1))
        out[i] = level
        hist.append(level)
    return out


def difference_dataset(dataset: Dataset, orders: Mapping[str, int]) -> tuple[Dataset, TransformLedger]:
    """Difference each column by its own order and trim all columns to a common start."""
    entries = {}
    diffed = {}
    for col in dataset.columns:
        k = int(orders.get(col.name, 0))
        if k == 0:
            entries[col.name] = LedgerEntry(col.name, 0, ())
            diffed[col.name] = col
        else:
            d, heads = difference(col, k)
            entries[col.name] = LedgerEntry(col.name, k, heads)
            diffed[col.name] = d
    ledger = TransformLedger(entries, dataset.start_year)
    trim = ledger.trim
    if len(dataset) - trim < 1:
        raise DegenerateInputError("differencing leaves no aligned rows")
    start = dataset.start_year + trim
    cols = [diffed[n].window(start - diffed[n].start_year) for n in dataset.column_names]
    return Dataset(cols[0], tuple(cols[1:])), ledger


def invert_dataset_column(aligned: TimeSeries, ledger: TransformLedger, levels: Dataset) -> TimeSeries:
    """Invert an aligned (possibly trimmed) differenced column back to level scale."""
    entry = ledger[aligned.name]
    k = entry.diff_order
    if k == 0:
        return aligned
    first = aligned.start_year - k
    history = levels.column(aligned.name)
    idx = first - history.start_year
    heads = tuple(history.values[idx : idx + k])
    return invert_difference(aligned, LedgerEntry(aligned.name, k, heads))


# --------------------------------------------------------------------------- supervised framing

def lag_features(matrix: np.ndarray, t: int, lags: int) -> np.ndarray:
    """Row of lags 1..L of every column for target index ``t`` (column blocks, lag-1 first)."""
    block = matrix[t - lags : t][::-1]  # (lags, c), lag 1 first
    return block.T.reshape(-1).copy()


def build_lag_matrix(dataset: Dataset, lags: int = 3) -> SupervisedMatrix:
    n = len(dataset)
    if lags < 1:
        raise ValueError("lags must be >= 1")
    if lags >= n:
        raise DegenerateInputError(f"lags={lags} needs more than {n} rows")
    m = dataset.matrix()
    X = np.stack([lag_features(m, t, lags) for t in range(lags, n)])
    y = m[lags:, 0].copy()
    names = tuple(f"{c}_lag{l}" for c in dataset.column_names for l in range(1, lags + 1))
    return SupervisedMatrix(X, y, dataset.years[lags:].copy(), names, lags)


def split(dataset: Dataset, test_len: int = 10) -> tuple[Dataset, Dataset]:
    if test_len < 1:
        raise ValueError("test_len must be >= 1")
    if test_len >= len(dataset):
        raise DegenerateInputError(f"test_len={test_len} leaves no training rows out of {len(dataset)}")
    cut = len(dataset) - test_len
    return dataset.window(0, cut), dataset.window(cut)


def concat(first: Dataset, second: Dataset) -> Dataset:
    if second.start_year != first.end_year + 1 or first.column_names != second.column_names:
        raise ValueError("datasets are not contiguous")
    return Dataset.from_matrix(first.column_names, first.start_year, np.vstack([first.matrix(), second.matrix()]))


# --------------------------------------------------------------------------- CSV

def _parse_float(text: str, line: int, column: str) -> float:
    s = text.strip()
    if s == "" or s.upper() in {"NA", "NAN", "N/A", "NULL", "NONE"}:
        raise DataFormatError(f"line {line}: missing value in column {column!r}", line, column)
    if "," in s:
        raise DataFormatError(f"line {line}: thousands separator in column {column!r}: {s!r}", line, column)
    try:
        v = float(s)
    except ValueError:
        raise DataFormatError(f"line {line}: cannot parse {s!r} in column {column!r}", line, column) from None
    if not math.isfinite(v):
        raise DataFormatError(f"line {line}: non-finite value in column {column!r}", line, column)
    return v


def read_csv(path: str | Path) -> Dataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError("line 1: empty file", 1)
    header = tuple(h.strip() for h in rows[0])
    if header != CSV_HEADER:
        raise DataFormatError(f"line 1: expected header {','.join(CSV_HEADER)}, got {','.join(header)}", 1)
    years, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise DataFormatError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}", lineno)
        try:
            year = int(row[0].strip())
        except ValueError:
            raise DataFormatError(f"line {lineno}: bad year {row[0]!r}", lineno, "year") from None
        if years and year != years[-1] + 1:
            raise DataFormatError(
                f"line {lineno}: year {year} does not follow {years[-1]} (years must be consecutive)",
                lineno,
                "year",
            )
        years.append(year)
        values.append([_parse_float(c, lineno, name) for c, name in zip(row[1:], CSV_HEADER[1:])])
    if not years:
        raise DataFormatError("line 2: no data rows", 2)
    return Dataset.from_matrix(CSV_HEADER[1:], years[0], np.array(values))


def write_csv(dataset: Dataset, path: str | Path, float_format: str = "{:.10g}") -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("year",) + dataset.column_names)
        m = dataset.matrix()
        for year, row in zip(dataset.years, m):
            w.writerow([int(year)] + [float_format.format(v) for v in row])

