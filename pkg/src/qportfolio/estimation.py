"""Maximum-likelihood fit of the multivariate q-Gaussian by differential evolution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DataError, DomainError
from .ingest import PriceRelativeSeries
from .numerics import DEConfig, differential_evolution
from .qalgebra import log_q_exp
from .qgaussian import MultivariateQGaussian, log_c_dq, log_likelihood

__all__ = ["FitConfig", "FitResult", "fit_mle", "GAUSSIAN_Q", "MIN_OBSERVATIONS"]

MIN_OBSERVATIONS = 30
# q used for the Gaussian (classical Cover) baseline; inside the q = 1 switchover
GAUSSIAN_Q = 1.0 + 1e-8

DEFAULT_Q_BOUNDS = (1.01, 2.2)
DEFAULT_MU_BOUNDS = (0.8, 1.2)
DEFAULT_SIGMA_BOUNDS = (1e-4, 0.5)
# keep the upper q strictly inside d < 2/(q-1)
Q_EDGE_MARGIN = 1e-3


@dataclass(frozen=True)
class FitConfig:
    """Search box and DE settings for :func:`fit_mle`.

    ``None`` entries are filled by :meth:`resolve` from the defaults
    ``q in [1.01, 2.2]`` (capped below ``1 + 2/d``), ``mu in [0.8, 1.2]`` and
    ``sigma in [1e-4, 0.5]`` per axis.
    """

    q_bounds: tuple[float, float] | None = None
    mu_bounds: tuple[tuple[float, float], ...] | None = None
    sigma_bounds: tuple[tuple[float, float], ...] | None = None
    de: DEConfig = field(default_factory=DEConfig)

    def resolve(self, d: int) -> "FitConfig":
        q_bounds = self.q_bounds
        if q_bounds is None:
            q_hi = min(DEFAULT_Q_BOUNDS[1], 1.0 + 2.0 / d - Q_EDGE_MARGIN)
            q_bounds = (DEFAULT_Q_BOUNDS[0], q_hi)
        mu_bounds = self.mu_bounds or (DEFAULT_MU_BOUNDS,) * d
        sigma_bounds = self.sigma_bounds or (DEFAULT_SIGMA_BOUNDS,) * d
        cfg = FitConfig(
            tuple(map(float, q_bounds)),
            tuple(tuple(map(float, b)) for b in mu_bounds),
            tuple(tuple(map(float, b)) for b in sigma_bounds),
            self.de,
        )
        cfg.validate(d)
        return cfg

    def validate(self, d: int) -> None:
        q_lo, q_hi = self.q_bounds
        if not 1.0 < q_lo <= q_hi < 3.0:
            raise DomainError(f"q_bounds must satisfy 1 < low <= high < 3, got {self.q_bounds}")
        if d * (q_hi - 1.0) >= 2.0:
            raise DomainError(f"q_bounds upper {q_hi} violates d < 2/(q-1) for d={d}")
        if len(self.mu_bounds) != d or len(self.sigma_bounds) != d:
            raise DomainError(f"need {d} mu and sigma bound pairs")
        for lo, hi in self.sigma_bounds:
            if not 0 < lo <= hi:
                raise DomainError("sigma bounds must be positive with low <= high")
        for lo, hi in self.mu_bounds:
            if not lo <= hi:
                raise DomainError("mu bounds need low <= high")

    def to_dict(self) -> dict:
        return {
            "q_bounds": None if self.q_bounds is None else list(self.q_bounds),
            "mu_bounds": None if self.mu_bounds is None else [list(b) for b in self.mu_bounds],
            "sigma_bounds": None if self.sigma_bounds is None else [list(b) for b in self.sigma_bounds],
            "de": self.de.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FitConfig":
        def pairs(v):
            return None if v is None else tuple(tuple(b) for b in v)

        return cls(
            q_bounds=None if data.get("q_bounds") is None else tuple(data["q_bounds"]),
            mu_bounds=pairs(data.get("mu_bounds")),
            sigma_bounds=pairs(data.get("sigma_bounds")),
            de=DEConfig.from_dict(data.get("de", {})),
        )


@dataclass
class FitResult:
    model: MultivariateQGaussian
    log_likelihood: float
    converged: bool
    trace: list[float]
    tickers: tuple[str, ...] = ()
    window: tuple[str, str] | None = None


def _objective(data: np.ndarray):
    n, d = data.shape

    def loglik(theta):
        q = theta[0]
        mu = theta[1 : 1 + d]
        sigma = theta[1 + d :]
        try:
            const = log_c_dq(d, q)
        except DomainError:
            return -math.inf
        z = (data - mu) / sigma
        z2 = np.einsum("ij,ij->i", z, z)
        val = n * (const - float(np.sum(np.log(sigma)))) + float(np.sum(log_q_exp(q, -z2)))
        return val if not math.isnan(val) else -math.inf

    return loglik


def fit_mle(data: PriceRelativeSeries, config: FitConfig | None = None) -> FitResult:
    """Jointly estimate ``(q, mu, sigma)`` by maximizing the log-likelihood.

    Raises
    ------
    DataError
        Fewer than ``MIN_OBSERVATIONS`` rows, or a ticker whose relatives are
        all equal.
    """
    x = np.asarray(data.relatives, dtype=float)
    n, d = x.shape
    if n < MIN_OBSERVATIONS:
        raise DataError(f"need at least {MIN_OBSERVATIONS} observations to fit, got {n}")
    for j, ticker in enumerate(data.tickers):
        if np.ptp(x[:, j]) == 0:
            raise DataError(f"ticker {ticker} has constant price relatives; cannot fit a scale")
    cfg = (config or FitConfig()).resolve(d)
    bounds = [cfg.q_bounds, *cfg.mu_bounds, *cfg.sigma_bounds]
    res = differential_evolution(_objective(x), bounds, cfg.de)
    theta = res.x
    model = MultivariateQGaussian(theta[0], theta[1 : 1 + d], theta[1 + d :])
    return FitResult(
        model=model,
        log_likelihood=log_likelihood(model, x),
        converged=res.converged,
        trace=res.trace,
        tickers=tuple(data.tickers),
        window=(data.dates[0].isoformat(), data.dates[-1].isoformat()),
    )


def gaussian_baseline_config(config: FitConfig | None = None) -> FitConfig:
    """Same search box with ``q`` pinned to :data:`GAUSSIAN_Q`."""
    return replace(config or FitConfig(), q_bounds=(GAUSSIAN_Q, GAUSSIAN_Q))
