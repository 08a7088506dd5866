"""Price CSV ingestion and the aligned price-relative container."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "PriceRelativeSeries",
    "load_prices",
    "parse_date",
    "fixture_path",
    "make_fixture_prices",
    "write_prices_csv",
    "FIXTURE_SEED",
]


def parse_date(text) -> dt.date:
    if isinstance(text, dt.date):
        return text
    try:
        return dt.date.fromisoformat(str(text).strip())
    except ValueError as exc:
        raise DataError(f"not an ISO-8601 date: {text!r}") from exc


@dataclass(eq=False)
class PriceRelativeSeries:
    """Daily price relatives ``close_t / close_{t-1}`` for ``d`` tickers on ``n`` dates."""

    tickers: tuple[str, ...]
    dates: tuple[dt.date, ...]
    relatives: np.ndarray

    def __post_init__(self):
        self.tickers = tuple(str(t) for t in self.tickers)
        self.dates = tuple(parse_date(d) for d in self.dates)
        rel = np.array(self.relatives, dtype=float)
        if rel.ndim == 1:
            rel = rel[:, None]
        if rel.ndim != 2 or rel.shape != (len(self.dates), len(self.tickers)):
            raise DataError(
                f"relatives shape {rel.shape} does not match {len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if len(set(self.tickers)) != len(self.tickers):
            raise DataError("duplicate ticker names")
        if np.any(~(rel > 0)) or not np.all(np.isfinite(rel)):
            raise DataError("price relatives must be finite and positive")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        rel.setflags(write=False)
        self.relatives = rel

    @property
    def n(self) -> int:
        return self.relatives.shape[0]

    @property
    def d(self) -> int:
        return self.relatives.shape[1]

    def __eq__(self, other):
        if not isinstance(other, PriceRelativeSeries):
            return NotImplemented
        return (
            self.tickers == other.tickers
            and self.dates == other.dates
            and np.array_equal(self.relatives, other.relatives)
        )

    def window(self, start=None, end=None) -> "PriceRelativeSeries":
        """Rows whose date lies in ``[start, end]`` (either end optional)."""
        start = parse_date(start) if start is not None else None
        end = parse_date(end) if end is not None else None
        keep = [
            i
            for i, day in enumerate(self.dates)
            if (start is None or day >= start) and (end is None or day <= end)
        ]
        if not keep:
            raise DataError(f"no observations between {start} and {end}")
        return PriceRelativeSeries(
            self.tickers, [self.dates[i] for i in keep], self.relatives[keep]
        )

    def select(self, tickers: Sequence[str]) -> "PriceRelativeSeries":
        missing = [t for t in tickers if t not in self.tickers]
        if missing:
            raise DataError(f"unknown ticker(s): {', '.join(missing)}")
        cols = [self.tickers.index(t) for t in tickers]
        return PriceRelativeSeries(tuple(tickers), self.dates, self.relatives[:, cols])

    @classmethod
    def from_array(cls, relatives, tickers=None, start=dt.date(2000, 1, 3)):
        """Wrap a bare ``(n, d)`` array, numbering days from ``start``."""
        rel = np.asarray(relatives, dtype=float)
        if rel.ndim == 1:
            rel = rel[:, None]
        tickers = tickers or [f"X{i + 1}" for i in range(rel.shape[1])]
        start = parse_date(start)
        dates = [start + dt.timedelta(days=i) for i in range(rel.shape[0])]
        return cls(tuple(tickers), tuple(dates), rel)

    def checksum(self) -> str:
        """SHA-256 over tickers, dates and the raw float64 bytes."""
        h = hashlib.sha256()
        h.update(",".join(self.tickers).encode())
        h.update(",".join(d.isoformat() for d in self.dates).encode())
        h.update(np.ascontiguousarray(self.relatives, dtype="<f8").tobytes())
        return h.hexdigest()


def _read_closes(path) -> dict[str, dict[dt.date, float]]:
    closes: dict[str, dict[dt.date, float]] = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        if header[:3] != ["date", "ticker", "close"]:
            raise DataError(f"{path}: expected header date,ticker,close, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                day = parse_date(row["date"])
                ticker = row["ticker"].strip()
                close = float(row["close"])
            except (TypeError, ValueError, AttributeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed row") from exc
            if not close > 0:
                raise DataError(f"{path}:{lineno}: non-positive close {close} for {ticker}")
            series = closes.setdefault(ticker, {})
            if day in series:
                raise DataError(f"{path}:{lineno}: duplicate row for ({day}, {ticker})")
            series[day] = close
    return closes


def load_prices(path, tickers: Iterable[str] | None = None, date_range=(None, None)) -> PriceRelativeSeries:
    """Read ``date,ticker,close`` rows and build aligned price relatives.

    Closes are first restricted to the dates every requested ticker trades
    on, so each relative spans the same interval for all tickers.  The first
    common date has no predecessor and yields no relative.  ``date_range``
    then filters the relatives by their (end-of-interval) date, inclusive.
    """
    closes = _read_closes(path)
    tickers = list(tickers) if tickers else sorted(closes)
    missing = [t for t in tickers if t not in closes]
    if missing:
        raise DataError(f"unknown ticker(s): {', '.join(missing)}")
    for t in tickers:
        if len(closes[t]) < 2:
            raise DataError(f"ticker {t} has fewer than 2 observations")
    common = sorted(set.intersection(*(set(closes[t]) for t in tickers)))
    if len(common) < 2:
        raise DataError("tickers share fewer than 2 trading dates")
    px = np.array([[closes[t][day] for t in tickers] for day in common])
    series = PriceRelativeSeries(tuple(tickers), tuple(common[1:]), px[1:] / px[:-1])
    start, end = date_range if date_range is not None else (None, None)
    if start is None and end is None:
        return series
    return series.window(start, end)


def write_prices_csv(path, tickers, dates, closes) -> None:
    closes = np.asarray(closes, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ticker", "close"])
        for i, day in enumerate(dates):
            for j, t in enumerate(tickers):
                w.writerow([parse_date(day).isoformat(), t, f"{closes[i, j]:.6f}"])


FIXTURE_SEED = 20180501
FIXTURE_TICKERS = ("SYN1", "SYN2", "SYN3", "SYN4")
FIXTURE_Q = 9.0 / 7.0


def fixture_path() -> Path:
    """Location of the bundled synthetic price file (4 tickers, 101 days)."""
    return Path(str(resources.files("qportfolio") / "data" / "fixture_prices.csv"))


def make_fixture_prices(seed: int = FIXTURE_SEED, days: int = 101):
    """Regenerate the bundled fixture: relatives from a 4-d q-Gaussian.

    Uses ``q = 9/7``, ``mu = 1``, ``sigma = 0.02``, starting every close at
    100 on 2018-01-02 and stepping over weekends.  A 4-d model cannot use
    ``q = 1.5`` (it needs ``q < 1.5``); at ``q = 9/7`` its Student-t degrees of
    freedom are 3, the same tail exponent as a univariate ``q = 1.5`` model,
    so each ticker's marginal has the power-law tail of a ``q = 1.5`` fit.
    """
    from .qgaussian import MultivariateQGaussian, sample_nd_nonnegative

    model = MultivariateQGaussian(FIXTURE_Q, [1.0] * 4, [0.02] * 4)
    rel, _ = sample_nd_nonnegative(model, np.random.default_rng(seed), days - 1)
    closes = 100.0 * np.vstack([np.ones(4), np.cumprod(rel, axis=0)])
    dates, day = [], dt.date(2018, 1, 2)
    while len(dates) < days:
        if day.weekday() < 5:
            dates.append(day)
        day += dt.timedelta(days=1)
    return FIXTURE_TICKERS, dates, closes
