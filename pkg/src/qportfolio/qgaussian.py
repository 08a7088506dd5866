"""Univariate and multivariate q-Gaussian densities.

Scale convention: the density is proportional to ``exp_q(-(x - mu)**2 / sigma**2)``
with no factor of two, so ``sigma`` is *not* the standard deviation.  At
``q = 1`` the variance is ``sigma**2 / 2``; for ``q < 5/3`` the univariate
variance is ``sigma**2 / (5 - 3q)``.

The multivariate model has a diagonal scale and an elliptical (not product)
profile::

    f(x) = C_{d,q} / prod(sigma) * exp_q(-sum_i ((x_i - mu_i) / sigma_i)**2)

Sampling for ``1 < q < 3`` uses the Student-t equivalence.  With
``nu = 2/(q-1) - d`` and ``T`` a d-variate Student-t with identity shape,
``Z = T / sqrt(2 - d(q-1))`` has the standardized q-Gaussian law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import DomainError, UnsupportedError
from .qalgebra import Q_SWITCH, _expq, is_classical, log_q_exp, require_normalizable

__all__ = [
    "UnivariateQGaussian",
    "MultivariateQGaussian",
    "c_q",
    "c_dq",
    "log_c_dq",
    "recursion_indices",
    "density_1d",
    "density_nd",
    "log_density_nd",
    "log_likelihood",
    "sample_1d",
    "sample_nd",
    "sample_nd_nonnegative",
]


@dataclass(frozen=True)
class UnivariateQGaussian:
    q: float
    mu: float
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "q", require_normalizable(self.q))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive and finite, got {self.sigma}")


@dataclass(frozen=True)
class MultivariateQGaussian:
    """Elliptical q-Gaussian with location ``mu`` and diagonal scale ``sigma``."""

    q: float
    mu: tuple[float, ...]
    sigma: tuple[float, ...]
    d: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "q", require_normalizable(self.q))
        mu = tuple(float(v) for v in np.atleast_1d(np.asarray(self.mu, dtype=float)))
        sigma = tuple(float(v) for v in np.atleast_1d(np.asarray(self.sigma, dtype=float)))
        if len(mu) == 0 or len(mu) != len(sigma):
            raise DomainError("mu and sigma must be nonempty and of equal length")
        if not all(math.isfinite(m) for m in mu):
            raise DomainError("mu must be finite")
        if not all(s > 0 and math.isfinite(s) for s in sigma):
            raise DomainError("every sigma_i must be positive and finite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "d", len(mu))

    @property
    def mu_array(self) -> np.ndarray:
        return np.array(self.mu)

    @property
    def sigma_array(self) -> np.ndarray:
        return np.array(self.sigma)

    def permuted(self, order) -> "MultivariateQGaussian":
        order = list(order)
        return MultivariateQGaussian(
            self.q, [self.mu[i] for i in order], [self.sigma[i] for i in order]
        )

    def univariate(self) -> UnivariateQGaussian:
        if self.d != 1:
            raise DomainError(f"a d={self.d} model has no univariate form")
        return UnivariateQGaussian(self.q, self.mu[0], self.sigma[0])

    def to_dict(self) -> dict:
        return {"q": self.q, "mu": list(self.mu), "sigma": list(self.sigma), "d": self.d}

    @classmethod
    def from_dict(cls, data: dict) -> "MultivariateQGaussian":
        model = cls(data["q"], data["mu"], data["sigma"])
        if "d" in data and int(data["d"]) != model.d:
            raise DomainError(f"record declares d={data['d']} but has {model.d} components")
        return model


def _log_c_q(q: float) -> float:
    if is_classical(q):
        return 0.5 * math.log(math.pi)
    if q < 1:
        a = 1.0 / (1.0 - q)
        return (
            math.log(2.0 * math.sqrt(math.pi))
            + gammaln(a)
            - math.log(3.0 - q)
            - 0.5 * math.log(1.0 - q)
            - gammaln(a + 0.5)
        )
    # 1 < q < 3: Gamma((3-q)/(2(q-1))) / Gamma(1/(q-1)), and (3-q)/(2(q-1)) = a - 1/2
    a = 1.0 / (q - 1.0)
    return 0.5 * math.log(math.pi) + gammaln(a - 0.5) - 0.5 * math.log(q - 1.0) - gammaln(a)


def c_q(q: float) -> float:
    """Normalization ``C_q = integral of exp_q(-x**2) dx`` of the 1-d q-Gaussian.

    Raises
    ------
    DomainError
        For ``q >= 3``.
    """
    q = require_normalizable(q)
    if is_classical(q):
        return math.sqrt(math.pi)
    return math.exp(_log_c_q(q))


def recursion_indices(q: float, d: int) -> list[float]:
    """``q_n = (2q + n(1-q)) / (2 + n(1-q))`` for ``n = 0, ..., d-1``.

    ``q_{n+1}`` is the index of the (d-n-1)-dimensional q-Gaussian left after
    integrating one coordinate out of a ``q_n`` one.
    """
    return [(2.0 * q + n * (1.0 - q)) / (2.0 + n * (1.0 - q)) for n in range(d)]


def _check_dq(d, q):
    if int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d}")
    q = require_normalizable(q)
    if q > 1 and not is_classical(q) and d * (q - 1.0) >= 2.0:
        raise DomainError(
            f"q-Gaussian with d={d}, q={q} is not normalizable: need d < 2/(q-1) = {2.0 / (q - 1.0):.6g}"
        )
    return int(d), q


def _log_c_dq_recursion(d, q):
    qs = recursion_indices(q, d)
    log_num = sum(0.5 * (d - 1 - k) * math.log((3.0 - qs[k]) / 2.0) for k in range(d - 1))
    log_den = sum(_log_c_q(qk) for qk in qs)
    return log_num - log_den


def _radial_integral(d, q):
    if is_classical(q):
        prof = lambda r: r ** (d - 1) * math.exp(-r * r)
        upper = math.inf
    elif q < 1:
        upper = 1.0 / math.sqrt(1.0 - q)
        prof = lambda r: r ** (d - 1) * max(0.0, 1.0 - (1.0 - q) * r * r) ** (1.0 / (1.0 - q))
    else:
        upper = math.inf
        prof = lambda r: r ** (d - 1) * (1.0 + (q - 1.0) * r * r) ** (-1.0 / (q - 1.0))
    val, _ = integrate.quad(prof, 0.0, upper, epsabs=0.0, epsrel=1e-12, limit=500)
    return val


def log_c_dq(d: int, q: float, method: str = "recursion") -> float:
    d, q = _check_dq(d, q)
    if method == "recursion":
        return _log_c_dq_recursion(d, q)
    if method == "radial":
        log_wd = math.log(2.0) + 0.5 * d * math.log(math.pi) - gammaln(0.5 * d)
        return -(log_wd + math.log(_radial_integral(d, q)))
    raise ValueError(f"unknown method {method!r}; expected 'recursion' or 'radial'")


def c_dq(d: int, q: float, method: str = "recursion") -> float:
    """Peak constant ``C_{d,q}`` of the unit-scale d-dimensional q-Gaussian.

    The density of a model with scales ``sigma`` is
    ``c_dq(d, q) / prod(sigma) * exp_q(-|z|**2)``.

    Parameters
    ----------
    d : int
        Dimension.
    q : float
        Entropic index; ``q < 3`` and, for ``q > 1``, ``d < 2/(q-1)``.
    method : {"recursion", "radial"}
        ``"recursion"`` chains one-dimensional constants ``C_{q_n}`` through the
        indices of :func:`recursion_indices`::

            C_{d,q} = prod_{k=0}^{d-2} ((3 - q_k)/2)**((d-1-k)/2) / prod_{k=0}^{d-1} C_{q_k}

        ``"radial"`` evaluates ``1 / (w_d * I_{q,d})`` with ``w_d`` the area of the
        unit sphere and ``I_{q,d} = int_0^inf r**(d-1) exp_q(-r**2) dr`` by
        adaptive quadrature.  The two agree to about 1e-12 relative.

    Raises
    ------
    DomainError
        If ``(d, q)`` is not normalizable; the message names the violated bound.
    """
    return math.exp(log_c_dq(d, q, method))


def density_1d(model: UnivariateQGaussian, x):
    """``exp_q(-(x-mu)**2/sigma**2) / (C_q sigma)``; zero off the support when q < 1."""
    x = np.asarray(x, dtype=float)
    z2 = ((x - model.mu) / model.sigma) ** 2
    out = _expq(model.q, -z2) / (c_q(model.q) * model.sigma)
    return float(out) if out.ndim == 0 else out


def _standardized_sq(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (model.d,):
        raise DomainError(f"expected points of dimension {model.d}, got shape {x.shape}")
    z = (x - model.mu_array) / model.sigma_array
    return np.sum(z * z, axis=-1)


def density_nd(model: MultivariateQGaussian, x):
    """Density of ``model`` at ``x`` (shape ``(d,)`` or ``(n, d)``)."""
    z2 = _standardized_sq(model, x)
    scale = c_dq(model.d, model.q) / float(np.prod(model.sigma_array))
    out = scale * _expq(model.q, -z2)
    return float(out) if np.ndim(out) == 0 else out


def log_density_nd(model: MultivariateQGaussian, x):
    z2 = _standardized_sq(model, x)
    const = log_c_dq(model.d, model.q) - float(np.sum(np.log(model.sigma_array)))
    return const + log_q_exp(model.q, -z2)


def log_likelihood(model: MultivariateQGaussian, data) -> float:
    """Sum of log densities over the rows of ``data``.

    Returns ``-inf`` if any observation has zero density (only possible for
    ``q < 1``, outside the compact support).
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1 and model.d == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[0] == 0:
        raise DomainError("data must be a nonempty (n, d) array")
    val = float(np.sum(log_density_nd(model, data)))
    return val if not math.isnan(val) else -math.inf


def _check_samplable(q, d):
    if not (1.0 < q < 3.0 or is_classical(q)):
        raise UnsupportedError(f"sampling is implemented for 1 <= q < 3 only (q={q})")
    if d * (q - 1.0) >= 2.0:
        raise UnsupportedError(f"cannot sample d={d}, q={q}: need d < 2/(q-1)")


def _standard_draws(q, d, rng, n):
    normals = rng.standard_normal((n, d))
    if q - 1.0 < Q_SWITCH:
        return normals / math.sqrt(2.0)
    nu = 2.0 / (q - 1.0) - d
    w = rng.chisquare(nu, n) / nu
    return normals / np.sqrt(w)[:, None] / math.sqrt(2.0 - d * (q - 1.0))


def sample_nd(model: MultivariateQGaussian, rng, size: int | None = None):
    """Draw from ``model`` via its elliptical Student-t representation.

    ``rng`` is a ``numpy.random.Generator`` (or a seed accepted by
    ``default_rng``).  Returns shape ``(d,)`` when ``size`` is None, else
    ``(size, d)``.
    """
    _check_samplable(model.q, model.d)
    rng = np.random.default_rng(rng)
    n = 1 if size is None else int(size)
    z = _standard_draws(model.q, model.d, rng, n)
    x = model.mu_array + model.sigma_array * z
    return x[0] if size is None else x


def sample_1d(model: UnivariateQGaussian, rng, size: int | None = None):
    """Univariate draws; identical stream to :func:`sample_nd` with ``d = 1``."""
    mv = MultivariateQGaussian(model.q, [model.mu], [model.sigma])
    x = sample_nd(mv, rng, 1 if size is None else size)[:, 0]
    return float(x[0]) if size is None else x


def sample_nd_nonnegative(model: MultivariateQGaussian, rng, n: int):
    """``n`` draws with every coordinate ``>= 0``, by rejection.

    Returns
    -------
    sample : ndarray, shape (n, d)
    rejection_fraction : float
        Share of raw draws discarded because some coordinate was negative.
    """
    _check_samplable(model.q, model.d)
    rng = np.random.default_rng(rng)
    kept, have, drawn = [], 0, 0
    while have < n:
        batch = int(1.05 * (n - have)) + 16
        x = model.mu_array + model.sigma_array * _standard_draws(model.q, model.d, rng, batch)
        drawn += batch
        x = x[np.all(x >= 0, axis=1)]
        kept.append(x)
        have += len(x)
        if drawn > 100 * n + 10_000 and have < 0.01 * drawn:
            raise UnsupportedError("model puts almost no mass on the nonnegative orthant")
    sample = np.concatenate(kept)[:n]
    return sample, 1.0 - have / drawn
