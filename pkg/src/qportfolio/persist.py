"""JSON records for models, portfolios and configs; CSV for tabular reports.

Floats are written with ``repr`` precision (JSON does this natively), so every
record loads back to exactly the value that was saved.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .estimation import FitConfig, FitResult
from .numerics import DEConfig, IntegratorSpec
from .optimizer import GrowthRateEstimate, Portfolio
from .qgaussian import MultivariateQGaussian
from .wealth_metrics import WealthTrajectory

__all__ = [
    "PipelineConfig",
    "SavedPortfolio",
    "load_config",
    "save_config",
    "save_fit",
    "load_fit",
    "save_portfolio",
    "load_portfolio",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_rows_csv",
    "write_json",
    "read_json",
]

TRAJECTORY_HEADER = ["date", "daily_factor", "wealth", "q_wealth"]


def write_json(path, record: dict) -> None:
    text = json.dumps(record, indent=2, allow_nan=True) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def _expect_kind(record, kind, path):
    if not isinstance(record, dict) or record.get("kind") != kind:
        raise DataError(f"{path} does not hold a {kind} record")


@dataclass(frozen=True)
class PipelineConfig:
    """Settings shared by the CLI subcommands; every section has defaults."""

    fit: FitConfig = field(default_factory=FitConfig)
    de: DEConfig = field(default_factory=DEConfig)
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)

    def to_dict(self) -> dict:
        fit = self.fit.to_dict()
        fit.pop("de")
        return {"fit": fit, "de": self.de.to_dict(), "integrator": self.integrator.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        unknown = set(data) - {"fit", "de", "integrator"}
        if unknown:
            raise DataError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        try:
            de = DEConfig.from_dict(data.get("de", {}))
            fit = FitConfig.from_dict({**data.get("fit", {}), "de": de.to_dict()})
            integrator = IntegratorSpec.from_dict(data.get("integrator", {}))
        except TypeError as exc:
            raise DataError(f"bad config entry: {exc}") from exc
        return cls(fit, de, integrator)


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    return PipelineConfig.from_dict(read_json(path))


def save_config(path, config: PipelineConfig) -> None:
    write_json(path, config.to_dict())


def fit_to_dict(fit: FitResult) -> dict:
    return {
        "kind": "fit_result",
        "model": fit.model.to_dict(),
        "log_likelihood": fit.log_likelihood,
        "converged": fit.converged,
        "tickers": list(fit.tickers),
        "window": None if fit.window is None else list(fit.window),
        "trace": list(fit.trace),
    }


def fit_from_dict(data: dict) -> FitResult:
    return FitResult(
        model=MultivariateQGaussian.from_dict(data["model"]),
        log_likelihood=float(data["log_likelihood"]),
        converged=bool(data["converged"]),
        trace=[float(v) for v in data.get("trace", [])],
        tickers=tuple(data.get("tickers", ())),
        window=None if data.get("window") is None else tuple(data["window"]),
    )


def save_fit(path, fit: FitResult) -> None:
    write_json(path, fit_to_dict(fit))


def load_fit(path) -> FitResult:
    record = read_json(path)
    _expect_kind(record, "fit_result", path)
    try:
        return fit_from_dict(record)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed fit record ({exc})") from exc


@dataclass(frozen=True)
class SavedPortfolio:
    """A portfolio together with its tickers and the growth q-rate it achieves."""

    portfolio: Portfolio
    tickers: tuple[str, ...]
    growth: GrowthRateEstimate | None = None
    q: float | None = None

    def to_dict(self) -> dict:
        g = self.growth
        return {
            "kind": "portfolio",
            "tickers": list(self.tickers),
            "weights": list(self.portfolio.weights),
            "q": self.q,
            "growth_q_rate": None if g is None else g.value,
            "std_error": None if g is None else g.std_error,
            "rejection_fraction": None if g is None else g.rejection_fraction,
            "integrator": None if g is None else g.method.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SavedPortfolio":
        growth = None
        if data.get("growth_q_rate") is not None:
            growth = GrowthRateEstimate(
                float(data["growth_q_rate"]),
                float(data["std_error"]),
                IntegratorSpec.from_dict(data["integrator"]),
                float(data.get("rejection_fraction") or 0.0),
            )
        tickers = tuple(data.get("tickers") or [f"X{i + 1}" for i in range(len(data["weights"]))])
        if len(tickers) != len(data["weights"]):
            raise DataError("portfolio tickers and weights differ in length")
        return cls(Portfolio(data["weights"]), tickers, growth, data.get("q"))


def save_portfolio(path, saved: SavedPortfolio) -> None:
    write_json(path, saved.to_dict())


def load_portfolio(path) -> SavedPortfolio:
    record = read_json(path)
    _expect_kind(record, "portfolio", path)
    try:
        return SavedPortfolio.from_dict(record)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed portfolio record ({exc})") from exc


def write_rows_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_trajectory_csv(path, traj: WealthTrajectory) -> None:
    rows = [
        [day.isoformat(), repr(float(f)), repr(float(w)), repr(float(qw))]
        for day, f, w, qw in zip(traj.days, traj.daily_factor, traj.wealth, traj.q_wealth)
    ]
    write_rows_csv(path, TRAJECTORY_HEADER, rows)


def read_trajectory_csv(path, q: float = float("nan")) -> WealthTrajectory:
    """Load a backtest CSV; ``q`` is not stored in the file and is passed through."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAJECTORY_HEADER:
            raise DataError(f"{path}: expected header {','.join(TRAJECTORY_HEADER)}")
        try:
            rows = [(dt.date.fromisoformat(r[0]), *map(float, r[1:4])) for r in reader]
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: malformed row ({exc})") from exc
    if not rows:
        raise DataError(f"{path} has no rows")
    days, f, w, qw = zip(*rows)
    return WealthTrajectory(tuple(days), np.array(f), np.array(w), np.array(qw), q)
