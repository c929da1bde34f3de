"""Price file loading, log-return transforms, and sample moments.

Input files are delimited text with a header row, one date column and one
price column. Missing or malformed rows are hard errors that name the
physical row (header = row 1): the downstream regime estimator assumes a
contiguous daily grid, and silently skipped rows would bias the
mean-reversion rate.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ColumnMapping:
    """How to read a delimited price file."""

    date_col: str = "date"
    price_col: str = "close"
    delimiter: str = ","


@dataclass(frozen=True)
class PriceSeries:
    """Daily closing levels with strictly increasing dates."""

    dates: tuple[dt.date, ...]
    closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=float)
        object.__setattr__(self, "closes", closes)
        if len(self.dates) != closes.shape[0]:
            raise DataError("dates and closes differ in length")
        if closes.shape[0] < 2:
            raise DataError("price series needs at least 2 observations")
        if np.any(~np.isfinite(closes)) or np.any(closes <= 0.0):
            raise DataError("all closes must be positive finite reals")
        for a, b in zip(self.dates, self.dates[1:]):
            if b <= a:
                raise DataError(f"non-monotone dates: {a} followed by {b}")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class ReturnSeries:
    """Log returns r_t = ln(close_t / close_{t-1}), dated by the later close."""

    dates: tuple[dt.date, ...]
    values: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if len(self.dates) != values.shape[0]:
            raise DataError("dates and values differ in length")
        if np.any(~np.isfinite(values)):
            raise DataError("all log returns must be finite")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class EmpiricalMoments:
    """Sample mean, unbiased variance, and standardized third/fourth moments.

    ``skewness`` and ``excess_kurtosis`` are the bias-uncorrected
    standardized central moments; they are None when the sample is
    degenerate (zero variance).
    """

    mean: float
    variance: float
    skewness: float | None
    excess_kurtosis: float | None
    n: int


def _parse_date(raw: str, row: int) -> dt.date:
    text = raw.strip()
    try:
        # Intraday timestamps are truncated to the calendar day.
        return dt.datetime.fromisoformat(text).date()
    except ValueError:
        pass
    try:
        return dt.date.fromisoformat(text)
    except ValueError as exc:
        raise DataError(f"row {row}: cannot parse date {text!r}") from exc


def load_prices(path, mapping: ColumnMapping | None = None) -> PriceSeries:
    """Read a delimited price file into a validated PriceSeries.

    Raises DataError naming the offending physical row (header = row 1)
    for missing prices, non-positive prices, unparseable fields, and
    non-monotone dates.
    """
    mapping = mapping or ColumnMapping()
    try:
        handle = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    dates: list[dt.date] = []
    closes: list[float] = []
    with handle:
        reader = csv.DictReader(handle, delimiter=mapping.delimiter)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file, header row required")
        missing = [c for c in (mapping.date_col, mapping.price_col)
                   if c not in reader.fieldnames]
        if missing:
            raise DataError(
                f"{path}: header lacks column(s) {missing}; found {reader.fieldnames}")
        for i, record in enumerate(reader):
            row = i + 2  # header occupies row 1
            raw_price = (record.get(mapping.price_col) or "").strip()
            if not raw_price:
                raise DataError(f"row {row}: missing price")
            try:
                price = float(raw_price)
            except ValueError as exc:
                raise DataError(f"row {row}: cannot parse price {raw_price!r}") from exc
            if not math.isfinite(price) or price <= 0.0:
                raise DataError(f"row {row}: non-positive price {raw_price}")
            date = _parse_date(record.get(mapping.date_col) or "", row)
            if dates and date <= dates[-1]:
                raise DataError(
                    f"row {row}: non-monotone dates ({dates[-1]} followed by {date})")
            dates.append(date)
            closes.append(price)

    if len(closes) < 2:
        raise DataError(f"{path}: need at least 2 price rows, got {len(closes)}")
    return PriceSeries(dates=tuple(dates), closes=np.array(closes))


def to_log_returns(prices: PriceSeries, source_id: str = "") -> ReturnSeries:
    """Transform a price series into its log returns."""
    values = np.diff(np.log(prices.closes))
    return ReturnSeries(dates=tuple(prices.dates[1:]), values=values,
                        source_id=source_id)


def empirical_moments(returns) -> EmpiricalMoments:
    """Sample moments of a return series (or plain array of reals).

    Values are accumulated in sorted order so the result depends only on
    the multiset of observations, not on their ordering.
    """
    values = np.sort(np.asarray(getattr(returns, "values", returns), dtype=float))
    n = values.shape[0]
    if n < 4:
        raise DataError(f"need at least 4 observations for moments, got {n}")
    mean = float(values.mean())
    centered = values - mean
    m2 = float(np.mean(centered ** 2))
    variance = float(np.sum(centered ** 2) / (n - 1))
    if m2 == 0.0:
        return EmpiricalMoments(mean=mean, variance=0.0, skewness=None,
                                excess_kurtosis=None, n=n)
    standardized = centered / math.sqrt(m2)
    skewness = float(np.mean(standardized ** 3))
    excess_kurtosis = float(np.mean(standardized ** 4) - 3.0)
    return EmpiricalMoments(mean=mean, variance=variance, skewness=skewness,
                            excess_kurtosis=excess_kurtosis, n=n)


def write_returns_csv(returns: ReturnSeries, path) -> None:
    """Persist returns as the two-column ``date,log_return`` format."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write("date,log_return\n")
        for date, value in zip(returns.dates, returns.values):
            handle.write(f"{date.isoformat()},{float(value)!r}\n")
