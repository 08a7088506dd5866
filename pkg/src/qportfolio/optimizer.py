"""Growth q-rate of a constant-rebalanced portfolio and its maximizer on the simplex.

The growth q-rate of weights ``b`` is ``E[ln_q(b . X)]`` with ``X`` drawn from
the fitted q-Gaussian *restricted to the nonnegative orthant* (prices cannot
go negative).  Both evaluation routes use that conditional law:

* Monte Carlo: average over a fixed sample from :func:`sample_nd_nonnegative`;
  draws with a negative coordinate are rejected and redrawn.
* Quadrature: integrate ``ln_q(b . x) f(x)`` and ``f(x)`` over
  ``[0, inf)**d`` in standardized coordinates and take the ratio.

For ``q > 1`` and small ``sigma`` the mass below zero is tiny, but it is not
zero for heavy tails, hence the explicit conditioning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .numerics import DEConfig, DEResult, IntegratorSpec, differential_evolution, integrate
from .qalgebra import _expq, _lnq, is_classical
from .qgaussian import MultivariateQGaussian, sample_nd_nonnegative

__all__ = [
    "Portfolio",
    "GrowthRateEstimate",
    "MarketSample",
    "OptimalPortfolio",
    "draw_market_sample",
    "growth_q_rate",
    "optimal_portfolio",
    "simplex_from_box",
]


@dataclass(frozen=True)
class Portfolio:
    """Long-only weights summing to one."""

    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in np.atleast_1d(np.asarray(self.weights, dtype=float)))
        if not w:
            raise DomainError("a portfolio needs at least one weight")
        if any(not (v >= 0) for v in w):
            raise DomainError("portfolio weights must be nonnegative")
        if abs(math.fsum(w) - 1.0) > 1e-10:
            raise DomainError(f"portfolio weights must sum to 1, got {math.fsum(w)!r}")
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.array(self.weights)

    @classmethod
    def uniform(cls, d: int) -> "Portfolio":
        return cls([1.0 / d] * d)


def simplex_from_box(u) -> np.ndarray:
    """Map ``u in [0, 1]**d`` to the simplex by ``u / sum(u)`` (uniform if all zero)."""
    u = np.asarray(u, dtype=float)
    s = u.sum()
    if not s > 0:
        return np.full(u.shape, 1.0 / u.size)
    w = u / s
    # absorb the rounding residue so the sum is 1 to the last bit we can manage
    w[np.argmax(w)] += 1.0 - math.fsum(w)
    return w


@dataclass(frozen=True)
class GrowthRateEstimate:
    value: float
    std_error: float
    method: IntegratorSpec
    rejection_fraction: float = 0.0

    def __post_init__(self):
        if not self.std_error >= 0:
            raise DomainError("std_error must be nonnegative")


@dataclass
class MarketSample:
    """A fixed draw of price-relative vectors reused across objective evaluations."""

    x: np.ndarray
    rejection_fraction: float
    q: float


def draw_market_sample(model: MultivariateQGaussian, spec: IntegratorSpec) -> MarketSample:
    x, rej = sample_nd_nonnegative(model, np.random.default_rng(spec.seed), spec.mc_samples)
    return MarketSample(x, rej, model.q)


def _check_dims(b: Portfolio, model: MultivariateQGaussian):
    if b.d != model.d:
        raise DomainError(f"portfolio has {b.d} weights but the model has d={model.d}")


def _sample_rate(weights, sample: MarketSample):
    vals = _lnq(sample.q, sample.x @ weights)
    n = len(vals)
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(n))


def _quadrature_rate(weights, model, spec):
    mu, sigma, q = model.mu_array, model.sigma_array, model.q
    lower = -mu / sigma
    if q < 1 and not is_classical(q):
        radius = 1.0 / math.sqrt(1.0 - q)
        region = [(max(lo, -radius), radius) for lo in lower]
    else:
        region = [(lo, math.inf) for lo in lower]

    def integrand(z):
        profile = _expq(q, -np.sum(z * z, axis=1))
        growth = _lnq(q, np.maximum((mu + sigma * z) @ weights, 0.0))
        num = np.where(profile > 0, growth * profile, 0.0)
        return np.stack([num, profile], axis=-1)

    if model.d == 1 and spec.method == "adaptive_quadrature_1d":
        num = integrate(lambda z: integrand(z)[:, 0], region, spec, vectorized=True)
        mass = integrate(lambda z: integrand(z)[:, 1], region, spec, vectorized=True)
        vals, errs = np.array([num.value, mass.value]), np.array([num.error, mass.error])
    elif spec.method == "cubature_nd":
        res = integrate(integrand, region, spec, vectorized=True)
        vals, errs = np.asarray(res.value), np.asarray(res.error)
    else:
        raise DomainError(f"{spec.method} cannot integrate a d={model.d} growth rate")
    value = vals[0] / vals[1]
    err = abs(value) * (errs[0] / max(abs(vals[0]), 1e-300) + errs[1] / vals[1])
    return float(value), float(err)


def growth_q_rate(
    b: Portfolio,
    model: MultivariateQGaussian,
    spec: IntegratorSpec = IntegratorSpec(),
    sample: MarketSample | None = None,
) -> GrowthRateEstimate:
    """``W_q(b) = E[ln_q(b . X)]`` under ``model`` conditioned on ``X >= 0``.

    For ``spec.method == "monte_carlo"`` the expectation is a sample average
    (over ``sample`` if given, else a fresh draw seeded by ``spec.seed``) and
    ``std_error`` is the sample standard error.  Quadrature routes report
    ``std_error = 0``; there is no sampling noise to speak of.
    """
    _check_dims(b, model)
    w = b.as_array()
    if spec.method == "monte_carlo":
        sample = sample if sample is not None else draw_market_sample(model, spec)
        value, err = _sample_rate(w, sample)
        return GrowthRateEstimate(value, err, spec, sample.rejection_fraction)
    value, _ = _quadrature_rate(w, model, spec)
    return GrowthRateEstimate(value, 0.0, spec, 0.0)


class OptimalPortfolio(NamedTuple):
    portfolio: Portfolio
    growth: GrowthRateEstimate
    search: DEResult | None


def _canonical_order(model: MultivariateQGaussian) -> list[int]:
    # relabeling the assets must not change the answer, so always search in a fixed order
    return sorted(range(model.d), key=lambda i: (model.mu[i], model.sigma[i]))


def optimal_portfolio(
    model: MultivariateQGaussian,
    spec: IntegratorSpec = IntegratorSpec(),
    de: DEConfig = DEConfig(),
) -> OptimalPortfolio:
    """Maximize :func:`growth_q_rate` over the long-only simplex.

    DE searches ``[0, 1]**d`` and each candidate is mapped onto the simplex by
    :func:`simplex_from_box`.  Under Monte Carlo one sample is drawn up front
    and shared by every evaluation, which makes the objective deterministic.
    Assets are processed in a canonical (mu, sigma) order, so permuting the
    model's assets permutes the answer and nothing else.
    """
    if model.d == 1:
        b = Portfolio([1.0])
        return OptimalPortfolio(b, growth_q_rate(b, model, spec), None)

    order = _canonical_order(model)
    canon = model.permuted(order)
    if spec.method == "monte_carlo":
        sample = draw_market_sample(canon, spec)
        objective = lambda u: _sample_rate(simplex_from_box(u), sample)[0]
    else:
        sample = None
        objective = lambda u: _quadrature_rate(simplex_from_box(u), canon, spec)[0]

    res = differential_evolution(objective, [(0.0, 1.0)] * model.d, de)
    w_canon = simplex_from_box(res.x)
    w = np.empty(model.d)
    w[order] = w_canon
    b = Portfolio(w)
    growth = growth_q_rate(Portfolio(w_canon), canon, spec, sample)
    return OptimalPortfolio(b, growth, res)
