"""Domain types and CSV ingestion for univariate return panels.

Conventions used throughout the package:

* series values are daily log-returns unless stated otherwise;
* variances are population (1/N) moments, so the block-mean ratio statistic
  equals 1 exactly in expectation under the IID null;
* missing values are handled by per-ticker row drops, never imputation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np


class CsvParseError(ValueError):
    """Malformed CSV content; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _frozen_array(values) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled univariate real sequence."""

    id: str
    values: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.values.ndim != 1 or len(self.values) < 1:
            raise ValueError(f"series {self.id!r}: need a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"series {self.id!r}: values must be finite")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Panel:
    """Mapping ticker -> TimeSeries, with optional per-ticker date labels."""

    series: Dict[str, TimeSeries]
    dates: Optional[Dict[str, List[str]]] = None

    def __post_init__(self):
        for ticker, ts in self.series.items():
            if ts.id != ticker:
                raise ValueError(f"panel key {ticker!r} != series id {ts.id!r}")

    def tickers(self) -> List[str]:
        return sorted(self.series)

    def __len__(self) -> int:
        return len(self.series)


@dataclass(frozen=True)
class WindowSet:
    """Paired (context window, forward target) slices of one series.

    ``inputs[i]`` holds W consecutive increments ending at time index
    ``target_start[i] - 1``; ``targets[i]`` is the sum of the T increments
    at indices ``target_start[i] .. target_start[i] + T - 1``. Targets
    therefore sit strictly after their window.
    """

    inputs: np.ndarray
    targets: np.ndarray
    target_start: np.ndarray
    W: int
    T: int

    def __post_init__(self):
        object.__setattr__(self, "inputs", _frozen_array(self.inputs))
        object.__setattr__(self, "targets", _frozen_array(self.targets))
        ts = np.ascontiguousarray(self.target_start, dtype=np.int64)
        ts.flags.writeable = False
        object.__setattr__(self, "target_start", ts)
        n = len(self.targets)
        if self.inputs.shape != (n, self.W) or self.target_start.shape != (n,):
            raise ValueError("window/target shape mismatch")

    def __len__(self) -> int:
        return len(self.targets)


def _parse_float(cell: str, line_no: int, col: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise CsvParseError(f"non-numeric value {cell!r} in column {col!r}", line_no) from None


def _to_log_returns(ticker: str, prices: np.ndarray) -> np.ndarray:
    if np.any(prices <= 0):
        bad = int(np.argmax(prices <= 0))
        raise ValueError(f"ticker {ticker!r}: non-positive price at row {bad}")
    return np.diff(np.log(prices))


def load_csv(path: str, format: str = "return") -> Panel:
    """Load a wide (date + ticker columns) or long (date,ticker,value) CSV.

    Wide vs long is auto-detected from the header: a 3-column header whose
    second column is named ``ticker`` is treated as long form. ``format``
    selects whether values are prices (converted to log-returns) or returns.
    Rows with missing cells are dropped per ticker; rows are sorted by date.
    """
    if format not in ("price", "return"):
        raise ValueError(f"format must be 'price' or 'return', got {format!r}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("empty file", 1) from None
        header = [h.strip() for h in header]
        if len(header) < 2:
            raise CsvParseError("header must declare a date column plus data columns", 1)
        long_form = len(header) == 3 and header[1].lower() == "ticker"
        # per ticker: list of (date, value)
        rows: Dict[str, List[Tuple[str, float]]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if long_form:
                if len(row) != 3:
                    raise CsvParseError(f"expected 3 columns, got {len(row)}", line_no)
                date, ticker, cell = (c.strip() for c in row)
                if not cell:
                    continue
                value = _parse_float(cell, line_no, header[2])
                rows.setdefault(ticker, []).append((date, value))
            else:
                if len(row) != len(header):
                    raise CsvParseError(
                        f"expected {len(header)} columns, got {len(row)}", line_no
                    )
                date = row[0].strip()
                for ticker, cell in zip(header[1:], row[1:]):
                    cell = cell.strip()
                    if not cell:
                        continue  # missing value: drop this row for this ticker
                    value = _parse_float(cell, line_no, ticker)
                    rows.setdefault(ticker, []).append((date, value))
    series: Dict[str, TimeSeries] = {}
    dates: Dict[str, List[str]] = {}
    for ticker in sorted(rows):
        entries = sorted(rows[ticker], key=lambda e: e[0])
        ticker_dates = [d for d, _ in entries]
        values = np.array([v for _, v in entries])
        if format == "price":
            values = _to_log_returns(ticker, values)
            ticker_dates = ticker_dates[1:]
        if len(values) == 0:
            raise ValueError(f"ticker {ticker!r}: empty series after processing")
        series[ticker] = TimeSeries(id=ticker, values=values)
        dates[ticker] = ticker_dates
    if not series:
        raise ValueError("no data rows found")
    return Panel(series=series, dates=dates)


def standardize(
    x: TimeSeries, stats_window: Optional[Tuple[int, int]] = None
) -> Tuple[TimeSeries, float, float]:
    """Affine-standardize using statistics from ``stats_window`` only.

    ``stats_window`` is a half-open index range (lo, hi); None means the whole
    series. Returns the standardized series plus (mean, std) for inverse
    transforms. Population (1/N) std; zero variance raises.
    """
    lo, hi = stats_window if stats_window is not None else (0, len(x))
    if not (0 <= lo < hi <= len(x)):
        raise ValueError(f"stats_window ({lo}, {hi}) outside series of length {len(x)}")
    seg = x.values[lo:hi]
    mean = float(seg.mean())
    std = float(seg.std())  # population convention
    if std <= 0.0:
        raise ValueError(f"series {x.id!r}: zero variance over stats window ({lo}, {hi})")
    out = TimeSeries(id=x.id, values=(x.values - mean) / std, dt=x.dt)
    return out, mean, std


def make_windows(
    x: TimeSeries, W: int, T: int, split: int
) -> Tuple[WindowSet, WindowSet]:
    """Slice one series into causally consistent train/test (window, target) pairs.

    Test pairs are exactly those whose T target indices all fall in the final
    ``split`` samples; train pairs are those with all target indices before
    the boundary (pairs straddling it are dropped). Train inputs never read
    at or past the boundary.
    """
    N = len(x)
    minimum = W + T + split
    if N < minimum:
        raise ValueError(
            f"series {x.id!r} too short: length {N} < required minimum {minimum} (W+T+split)"
        )
    v = x.values
    boundary = N - split
    starts = np.arange(W, N - T + 1)  # target start indices
    inputs = np.stack([v[s - W : s] for s in starts])
    csum = np.concatenate([[0.0], np.cumsum(v)])
    targets = csum[starts + T] - csum[starts]
    is_test = starts >= boundary
    is_train = starts + T <= boundary
    train = WindowSet(
        inputs=inputs[is_train], targets=targets[is_train],
        target_start=starts[is_train], W=W, T=T,
    )
    test = WindowSet(
        inputs=inputs[is_test], targets=targets[is_test],
        target_start=starts[is_test], W=W, T=T,
    )
    return train, test
