"""q-deformed logarithm, exponential and product.

All functions accept scalars or numpy arrays and return a ``float`` for scalar
input.  Near ``q = 1`` (``|q - 1| < Q_SWITCH``) the ordinary log/exp/product
are used; elsewhere powers ``x**(1-q)`` are formed as ``exp((1-q) ln x)`` and
the brackets ``1 + (1-q) y`` through ``log1p``/``expm1`` so nothing cancels
when ``q`` is close to one.

Cutoff convention: ``[A]_+ = max(0, A)``.  When the bracket of ``q_exp`` (or of
the q-product) is non-positive the result is exactly ``0.0`` for ``q < 1`` and
``+inf`` for ``q > 1`` (zero raised to a negative power).  Callers that must
tell these cases apart use :func:`cutoff_active` and :func:`saturates`.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

__all__ = [
    "Q_SWITCH",
    "is_classical",
    "require_finite_q",
    "require_normalizable",
    "require_finite_variance",
    "q_log",
    "q_exp",
    "log_q_exp",
    "cutoff_active",
    "saturates",
    "q_product",
    "q_product_fold",
    "q_product_accumulate",
    "product_cutoff_active",
    "tsallis_entropy",
]

Q_SWITCH = 1e-8


def _out(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def is_classical(q: float) -> bool:
    """True when ``q`` is close enough to one to use the ordinary functions."""
    return abs(q - 1.0) < Q_SWITCH


def require_finite_q(q: float) -> float:
    q = float(q)
    if not math.isfinite(q):
        raise DomainError(f"entropic index q must be finite, got {q}")
    return q


def require_normalizable(q: float) -> float:
    """Validate ``q < 3``, the range where a q-Gaussian can be normalized."""
    q = require_finite_q(q)
    if q >= 3.0:
        raise DomainError(f"q-Gaussian is not normalizable for q >= 3 (q={q})")
    return q


def require_finite_variance(q: float) -> float:
    q = require_finite_q(q)
    if q >= 5.0 / 3.0:
        raise DomainError(f"q-Gaussian variance is infinite for q >= 5/3 (q={q})")
    return q


def _lnq(q, x):
    # no domain check; x == 0 gives the limiting value
    with np.errstate(divide="ignore"):
        lx = np.log(x)
    if is_classical(q):
        return lx
    with np.errstate(over="ignore", invalid="ignore"):
        return np.expm1((1.0 - q) * lx) / (1.0 - q)


def _expq(q, y):
    y = np.asarray(y, dtype=float)
    if is_classical(q):
        with np.errstate(over="ignore"):
            return np.exp(y)
    u = (1.0 - q) * y
    alive = u > -1.0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        val = np.exp(np.log1p(np.where(alive, u, 0.0)) / (1.0 - q))
    dead = 0.0 if q < 1.0 else np.inf
    return np.where(alive, val, dead)


def q_log(q: float, x):
    """q-logarithm ``(x**(1-q) - 1) / (1 - q)`` for ``x > 0``.

    Raises
    ------
    DomainError
        If any ``x <= 0``.
    """
    q = require_finite_q(q)
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("q_log requires x > 0")
    return _out(_lnq(q, x))


def q_exp(q: float, x):
    """q-exponential ``[1 + (1-q) x]_+ ** (1/(1-q))``.

    Never raises for real ``x``; see the module notes for the cutoff and the
    ``+inf`` saturation used when ``q > 1``.
    """
    q = require_finite_q(q)
    return _out(_expq(q, x))


def log_q_exp(q: float, x):
    """Natural log of ``q_exp(q, x)``; ``-inf`` at a q<1 cutoff, ``+inf`` when saturated."""
    q = require_finite_q(q)
    y = np.asarray(x, dtype=float)
    if is_classical(q):
        return _out(y)
    u = (1.0 - q) * y
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.log1p(np.where(u > -1.0, u, 0.0)) / (1.0 - q)
    dead = -np.inf if q < 1.0 else np.inf
    return _out(np.where(u > -1.0, val, dead))


def cutoff_active(q: float, x):
    """Whether the bracket ``1 + (1-q) x`` of ``q_exp`` is non-positive."""
    q = require_finite_q(q)
    x = np.asarray(x, dtype=float)
    if is_classical(q):
        res = np.zeros(x.shape, dtype=bool)
    else:
        res = (1.0 - q) * x <= -1.0
    return bool(res) if res.ndim == 0 else res


def saturates(q: float, x):
    """Whether ``q_exp(q, x)`` is reported as ``+inf``."""
    res = np.isinf(_expq(require_finite_q(q), x))
    return bool(res) if res.ndim == 0 else res


def _check_nonneg(*arrays):
    for a in arrays:
        if np.any(~(np.asarray(a, dtype=float) >= 0)):
            raise DomainError("q-product arguments must be nonnegative")


def q_product(q: float, x, y):
    """q-product ``[x**(1-q) + y**(1-q) - 1]_+ ** (1/(1-q))`` of nonnegative reals.

    The bracket minus one is accumulated as ``expm1((1-q) ln x) + expm1((1-q) ln y)``,
    i.e. ``exp_q(ln_q x + ln_q y)``.  A zero factor with ``q > 1`` gives the
    limiting value ``0``.
    """
    q = require_finite_q(q)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_nonneg(x, y)
    if is_classical(q):
        return _out(x * y)
    return _out(_expq(q, _lnq(q, x) + _lnq(q, y)))


def q_product_fold(q: float, xs):
    """n-ary q-product ``[sum x_i**(1-q) - (n-1)]_+ ** (1/(1-q))`` along axis 0."""
    q = require_finite_q(q)
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 0 or xs.shape[0] == 0:
        raise DomainError("q_product_fold needs at least one factor")
    _check_nonneg(xs)
    if is_classical(q):
        return _out(np.prod(xs, axis=0))
    return _out(_expq(q, np.sum(_lnq(q, xs), axis=0)))


def q_product_accumulate(q: float, xs):
    """Prefix folds: element ``k`` is ``q_product_fold(q, xs[:k+1])``."""
    q = require_finite_q(q)
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 0 or xs.shape[0] == 0:
        raise DomainError("q_product_accumulate needs at least one factor")
    _check_nonneg(xs)
    if is_classical(q):
        return np.cumprod(xs, axis=0)
    return _expq(q, np.cumsum(_lnq(q, xs), axis=0))


def product_cutoff_active(q: float, xs):
    """Whether the bracket of ``q_product_fold(q, xs)`` is non-positive."""
    xs = np.asarray(xs, dtype=float)
    _check_nonneg(xs)
    return cutoff_active(q, np.sum(_lnq(require_finite_q(q), xs), axis=0))


def tsallis_entropy(q: float, p) -> float:
    """Tsallis entropy ``(1 - sum p_i**q) / (q - 1)`` with ``k_B = 1``.

    Evaluated as ``sum p_i ln_q(1/p_i)``, a sum of nonnegative terms, which
    reduces to the Shannon entropy (natural log) at ``q = 1``.  States with
    zero probability contribute nothing.
    """
    q = require_finite_q(q)
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("distribution must be a nonempty 1-d vector")
    if np.any(~(p >= 0)) or abs(p.sum() - 1.0) > 1e-12:
        raise DomainError("probabilities must be nonnegative and sum to 1")
    p = p[p > 0]
    lp = np.log(p)
    if is_classical(q):
        return float(-np.sum(p * lp))
    return float(np.sum(p * np.expm1((q - 1.0) * lp)) / (1.0 - q))
