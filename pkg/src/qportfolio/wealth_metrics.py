"""Wealth tracks of a constant-rebalanced portfolio, plus Sharpe and Sortino ratios."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError, UndefinedMetricError
from .ingest import PriceRelativeSeries
from .optimizer import Portfolio
from .qalgebra import q_product_accumulate, require_finite_q
from .qgaussian import MultivariateQGaussian

__all__ = [
    "WealthTrajectory",
    "wealth_relative",
    "sharpe_ratio",
    "sortino_ratio",
    "daily_returns",
    "BacktestReport",
    "backtest",
]


@dataclass(frozen=True, eq=False)
class WealthTrajectory:
    """Day-by-day portfolio factor ``b . x_t`` and its two running products.

    ``wealth`` is the ordinary cumulative product and ``q_wealth`` the
    cumulative q-product at ``q``; both start at the first daily factor.
    """

    days: tuple[dt.date, ...]
    daily_factor: np.ndarray
    wealth: np.ndarray
    q_wealth: np.ndarray
    q: float

    def __len__(self):
        return len(self.days)

    def __eq__(self, other):
        if not isinstance(other, WealthTrajectory):
            return NotImplemented
        return (
            self.days == other.days
            and self.q == other.q
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("daily_factor", "wealth", "q_wealth")
            )
        )


def wealth_relative(b: Portfolio, data: PriceRelativeSeries, q: float) -> WealthTrajectory:
    """Rebalance to ``b`` every day over ``data`` and accumulate wealth.

    Raises
    ------
    DomainError
        ``b`` and ``data`` disagree on the number of assets.
    DataError
        A price relative is negative (cannot happen for a validated series,
        but checked for raw arrays wrapped by hand).
    """
    q = require_finite_q(q)
    x = np.asarray(data.relatives, dtype=float)
    if x.shape[1] != b.d:
        raise DomainError(f"portfolio has {b.d} weights but the data has {x.shape[1]} tickers")
    if np.any(x < 0):
        raise DataError("negative price relative")
    factor = x @ b.as_array()
    return WealthTrajectory(
        days=tuple(data.dates),
        daily_factor=factor,
        wealth=np.cumprod(factor),
        q_wealth=np.asarray(q_product_accumulate(q, factor)),
        q=q,
    )


def daily_returns(trajectory: WealthTrajectory) -> np.ndarray:
    """Arithmetic returns ``b . x_t - 1``."""
    return trajectory.daily_factor - 1.0


def _as_returns(returns, minimum):
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or r.size < minimum:
        raise DomainError(f"need a 1-d series of at least {minimum} returns")
    if not np.all(np.isfinite(r)):
        raise DomainError("returns must be finite")
    return r


def sharpe_ratio(returns, risk_free: float = 0.0) -> float:
    """Mean excess return over the sample (``n - 1``) standard deviation.

    Raises
    ------
    UndefinedMetricError
        The returns have zero variance.

    Examples
    --------
    >>> round(sharpe_ratio([0.01, 0.02, -0.01]), 5)
    0.43644
    """
    r = _as_returns(returns, 2)
    excess = r - risk_free
    sd = float(np.std(r, ddof=1))
    # an all-equal series can still give sd ~ 1e-19 from rounding in the mean
    if np.all(r == r[0]) or sd <= 1e-14 * max(1.0, float(np.max(np.abs(r)))):
        raise UndefinedMetricError("Sharpe ratio undefined: returns have zero variance")
    return float(np.mean(excess)) / sd


def sortino_ratio(returns, target: float = 0.0) -> float:
    """Mean excess return over the target downside deviation.

    ``TDD = sqrt(mean(min(0, r - target)**2))``, averaging over all ``N``
    returns, not only the losing ones.

    Raises
    ------
    UndefinedMetricError
        No return falls below ``target`` (``TDD = 0``).
    """
    r = _as_returns(returns, 1)
    excess = r - target
    shortfall = np.minimum(0.0, excess)
    if not np.any(shortfall < 0):
        raise UndefinedMetricError("Sortino ratio undefined: no return below target")
    tdd = math.sqrt(float(np.mean(shortfall**2)))
    return float(np.mean(excess)) / tdd


@dataclass(frozen=True, eq=False)
class BacktestReport:
    """A portfolio applied to realized data, with its risk ratios.

    ``sharpe`` and ``sortino`` are None when undefined (zero variance, or no
    return below target).
    """

    portfolio: Portfolio
    model: MultivariateQGaussian
    trajectory: WealthTrajectory
    sharpe: float | None
    sortino: float | None
    window: tuple[dt.date, dt.date]


def _or_none(metric, returns):
    try:
        return metric(returns, 0.0)
    except (UndefinedMetricError, DomainError):
        return None


def backtest(portfolio: Portfolio, model: MultivariateQGaussian, data: PriceRelativeSeries) -> BacktestReport:
    """Run ``portfolio`` over ``data`` with q-wealth at the model's q; ``R_f = T = 0``."""
    traj = wealth_relative(portfolio, data, model.q)
    r = daily_returns(traj)
    return BacktestReport(
        portfolio=portfolio,
        model=model,
        trajectory=traj,
        sharpe=_or_none(sharpe_ratio, r),
        sortino=_or_none(sortino_ratio, r),
        window=(data.dates[0], data.dates[-1]),
    )
