"""Differential evolution and box/full-space integration.

Unbounded axes are mapped onto a finite interval with ``x = tan(pi u / 2)``;
an axis ``[lo, hi]`` with an infinite end becomes
``u in [2/pi atan(lo), 2/pi atan(hi)]`` with Jacobian ``pi/2 (1 + x**2)``.
Finite axes are integrated as they are.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as _integrate

from .errors import DomainError, OptimizationFailedError

__all__ = [
    "DEConfig",
    "DEResult",
    "IntegratorSpec",
    "IntegrationResult",
    "differential_evolution",
    "integrate",
]


@dataclass(frozen=True)
class DEConfig:
    """Settings for DE/rand/1/bin.

    ``population_size=None`` means ten individuals per dimension.  ``workers``
    only changes how a generation is evaluated, never the result.
    """

    population_size: int | None = None
    differential_weight: float = 0.8
    crossover_rate: float = 0.9
    max_generations: int = 300
    tolerance: float = 1e-8
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.population_size is not None and self.population_size < 4:
            raise DomainError("DE needs a population of at least 4")
        if not 0 < self.differential_weight <= 2:
            raise DomainError("differential weight F must lie in (0, 2]")
        if not 0 <= self.crossover_rate <= 1:
            raise DomainError("crossover rate CR must lie in [0, 1]")
        if self.max_generations < 1:
            raise DomainError("max_generations must be positive")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DEConfig":
        return cls(**data)


@dataclass
class DEResult:
    x: np.ndarray
    value: float
    trace: list[float]
    generations: int
    evaluations: int
    converged: bool


STALL_GENERATIONS = 20


def _reflect(x, lo, hi):
    # fold back into [lo, hi] by repeated mirror reflection
    width = hi - lo
    safe = np.where(width > 0, width, 1.0)
    y = np.mod(x - lo, 2.0 * safe)
    y = np.where(y > safe, 2.0 * safe - y, y)
    return np.where(width > 0, lo + y, lo)


def differential_evolution(
    objective: Callable[[np.ndarray], float],
    bounds: Sequence[tuple[float, float]],
    config: DEConfig = DEConfig(),
) -> DEResult:
    """Maximize ``objective`` over a box with DE/rand/1/bin.

    Trial vectors leaving the box are reflected back into it, so every
    evaluated point is feasible.  Non-finite objective values count as the
    worst possible.  The search stops after ``max_generations`` or once the
    best value has improved by less than ``tolerance`` over the last
    ``STALL_GENERATIONS`` generations (``converged=True``).

    The run is a deterministic function of ``config.seed``; with
    ``workers > 1`` a generation's trial vectors are scored in a thread pool
    and collected by index.
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2 or not np.all(np.isfinite(bounds)):
        raise DomainError("bounds must be a sequence of finite (low, high) pairs")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(hi < lo):
        raise DomainError("every bound needs low <= high")
    dim = len(lo)
    npop = config.population_size or max(4, 10 * dim)
    rng = np.random.default_rng(config.seed)
    F, CR = config.differential_weight, config.crossover_rate

    def score(points):
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                vals = list(pool.map(objective, points))
        else:
            vals = [objective(p) for p in points]
        vals = np.array(vals, dtype=float)
        return np.where(np.isfinite(vals) | (vals == np.inf), vals, -np.inf)

    pop = lo + rng.random((npop, dim)) * (hi - lo)
    fit = score(pop)
    nfev = npop
    trace = [float(np.max(fit))]
    converged = False
    generations = 0
    for generations in range(1, config.max_generations + 1):
        idx = np.empty((npop, 3), dtype=int)
        for i in range(npop):
            choices = rng.choice(npop - 1, size=3, replace=False)
            idx[i] = choices + (choices >= i)
        mutant = pop[idx[:, 0]] + F * (pop[idx[:, 1]] - pop[idx[:, 2]])
        cross = rng.random((npop, dim)) < CR
        cross[np.arange(npop), rng.integers(0, dim, npop)] = True
        trial = _reflect(np.where(cross, mutant, pop), lo, hi)
        trial_fit = score(trial)
        nfev += npop
        better = trial_fit >= fit
        pop = np.where(better[:, None], trial, pop)
        fit = np.where(better, trial_fit, fit)
        trace.append(float(np.max(fit)))
        if (
            generations >= STALL_GENERATIONS
            and np.isfinite(trace[-1])
            and trace[-1] - trace[-1 - STALL_GENERATIONS] < config.tolerance
        ):
            converged = True
            break

    best = int(np.argmax(fit))
    if not np.isfinite(fit[best]):
        raise OptimizationFailedError("objective was never finite on the search box", trace)
    return DEResult(pop[best].copy(), float(fit[best]), trace, generations, nfev, converged)


METHODS = ("adaptive_quadrature_1d", "cubature_nd", "monte_carlo")


@dataclass(frozen=True)
class IntegratorSpec:
    method: str = "monte_carlo"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_evals: int = 2_000_000
    mc_samples: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown integration method {self.method!r}; expected one of {METHODS}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("integration tolerances must be positive")
        if self.max_evals < 1:
            raise DomainError("max_evals must be positive")
        if self.method == "monte_carlo" and self.mc_samples < 1000:
            raise DomainError("monte_carlo needs mc_samples >= 1000")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "IntegratorSpec":
        return cls(**data)


@dataclass
class IntegrationResult:
    value: float
    error: float
    converged: bool = True
    evaluations: int = 0
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.value
        yield self.error


class _BoxMap:
    """Map a region with possibly infinite ends onto a finite box."""

    def __init__(self, region):
        region = np.asarray(region, dtype=float)
        if region.ndim != 2 or region.shape[1] != 2:
            raise DomainError("region must be a sequence of (low, high) pairs")
        if np.any(region[:, 1] < region[:, 0]) or np.any(np.isnan(region)):
            raise DomainError("every region axis needs low <= high")
        self.tan_axes = ~np.all(np.isfinite(region), axis=1)
        self.lo = np.where(self.tan_axes, 2.0 / np.pi * np.arctan(region[:, 0]), region[:, 0])
        self.hi = np.where(self.tan_axes, 2.0 / np.pi * np.arctan(region[:, 1]), region[:, 1])
        self.dim = region.shape[0]

    def __call__(self, u):
        # u: (n, dim) -> x, jacobian
        t = np.tan(0.5 * np.pi * u)
        x = np.where(self.tan_axes, t, u)
        jac = np.prod(np.where(self.tan_axes, 0.5 * np.pi * (1.0 + t * t), 1.0), axis=1)
        return x, jac

    @property
    def volume(self):
        return float(np.prod(self.hi - self.lo))


def _pointwise(f, vectorized):
    if vectorized:
        return lambda x: np.asarray(f(x), dtype=float)
    return lambda x: np.array([f(row) for row in x], dtype=float)


def integrate(
    f: Callable,
    region: Sequence[tuple[float, float]],
    spec: IntegratorSpec = IntegratorSpec(),
    *,
    vectorized: bool = False,
    proposal=None,
) -> IntegrationResult:
    """Integrate ``f`` over a box whose ends may be infinite.

    Parameters
    ----------
    f : callable
        Integrand.  With ``vectorized=True`` it receives an ``(n, d)`` array and
        returns ``(n,)`` values (or ``(n, k)`` for k integrands at once);
        otherwise it is called with one ``(d,)`` point at a time.
    region : sequence of (low, high)
        One pair per axis; use ``(-inf, inf)`` for a full-space axis.
    spec : IntegratorSpec
        Method, tolerances and sample budget.
    proposal : object, optional
        Monte Carlo only.  Provides ``sample(rng, n) -> (n, d)`` and
        ``pdf(x) -> (n,)``; the estimate is then the importance-sampling mean
        of ``f/pdf`` over draws falling in ``region``.

    Returns
    -------
    IntegrationResult
        ``value`` and a nonnegative ``error`` estimate.  ``converged`` is False
        when the requested tolerance was not reached within ``max_evals``.
    """
    g = _pointwise(f, vectorized)
    box = _BoxMap(region)

    def mapped(u):
        u = np.atleast_2d(u)
        x, jac = box(u)
        val = g(x)
        jac = jac.reshape((-1,) + (1,) * (val.ndim - 1))
        out = val * jac
        return np.where(np.isfinite(out), out, 0.0)

    if spec.method == "adaptive_quadrature_1d":
        if box.dim != 1:
            raise DomainError("adaptive_quadrature_1d integrates one-dimensional regions only")
        limit = max(50, spec.max_evals // 21)
        val, err, info, *msg = _integrate.quad(
            lambda u: float(np.ravel(mapped(np.array([[u]])))[0]),
            box.lo[0],
            box.hi[0],
            epsabs=spec.abs_tol,
            epsrel=spec.rel_tol,
            limit=limit,
            full_output=1,
        )
        return IntegrationResult(float(val), float(abs(err)), not msg, int(info["neval"]))

    if spec.method == "cubature_nd":
        res = _integrate.cubature(
            mapped,
            box.lo,
            box.hi,
            rtol=spec.rel_tol,
            atol=spec.abs_tol,
            max_subdivisions=max(1, spec.max_evals // 100),
        )
        est, err = np.asarray(res.estimate), np.abs(np.asarray(res.error))
        if est.ndim == 0:
            est, err = float(est), float(err)
        return IntegrationResult(est, err, res.status == "converged", int(res.subdivisions))

    rng = np.random.default_rng(spec.seed)
    n = spec.mc_samples
    if proposal is None:
        u = box.lo + rng.random((n, box.dim)) * (box.hi - box.lo)
        vals = mapped(u) * box.volume
    else:
        x = np.asarray(proposal.sample(rng, n), dtype=float).reshape(n, -1)
        region = np.asarray(region, dtype=float)
        inside = np.all((x >= region[:, 0]) & (x <= region[:, 1]), axis=1)
        vals = g(x)
        w = np.where(inside, 1.0 / np.asarray(proposal.pdf(x), dtype=float), 0.0)
        vals = vals * w.reshape((-1,) + (1,) * (vals.ndim - 1))
    mean = vals.mean(axis=0)
    err = vals.std(axis=0, ddof=1) / math.sqrt(n)
    if np.ndim(mean) == 0:
        mean, err = float(mean), float(err)
    tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(mean))
    return IntegrationResult(mean, err, bool(np.all(err <= tol)), n)
