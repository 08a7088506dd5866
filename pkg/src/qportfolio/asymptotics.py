"""Monte Carlo checks of the large-n behaviour of q-wealth.

Three checks run on simulated i.i.d. markets drawn from a fitted model:

* :func:`check_lln`: the per-path rate ``(1/n) ln_q S*_n`` approaches ``W*_q``.
* :func:`check_markov_bound`: ``P(S_n / S*_n > lam) <= 1/lam`` for a competitor.
* :func:`check_finite_n_bound`: ``(1/n) ln_q(S_n / S*_n) <= ln_q(n**2) / n``
  eventually, for almost every path.

Every path gets its own generator spawned from ``SeedSequence(seed)``, so a
path's draws do not depend on how many paths run or in which thread.

q-wealth is handled through its q-log ``A_n = sum_i ln_q(b . x_i)``, from which
``S_n = exp_q(A_n)``.  For ``q > 1`` the q-exponential has a pole at
``A = 1/(q-1)``; past it the q-wealth is infinite ("saturated") and such
paths are counted separately instead of being silently dropped.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence, Union

import numpy as np

from .errors import DomainError
from .numerics import IntegratorSpec
from .optimizer import Portfolio, growth_q_rate
from .qalgebra import _expq, _lnq, is_classical, q_log
from .qgaussian import MultivariateQGaussian, _check_samplable, sample_nd_nonnegative

__all__ = [
    "SimulationRun",
    "CheckReport",
    "simulate_market",
    "check_lln",
    "check_markov_bound",
    "check_finite_n_bound",
    "reference_growth_rate",
    "LLN_CHECKPOINTS",
    "N0",
]

log = logging.getLogger(__name__)

LLN_CHECKPOINTS = (100, 1_000, 10_000)
N0 = 100
BASEL = math.pi**2 / 6

# history of past price relatives (shape (i, d)) -> weights for day i
CausalStrategy = Callable[[np.ndarray], Union[Portfolio, Sequence[float]]]


@dataclass(frozen=True)
class SimulationRun:
    """One simulation setup.

    ``competitor`` is either a fixed :class:`Portfolio` or a causal strategy,
    a callable mapping the relatives seen so far to the next day's weights.
    ``w_star`` is the growth q-rate of ``b_star``; when omitted it is computed
    by quadrature.
    """

    model: MultivariateQGaussian
    b_star: Portfolio
    competitor: Portfolio | CausalStrategy | None = None
    horizon: int = 10_000
    paths: int = 1_000
    seed: int = 0
    w_star: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.horizon < 1 or self.paths < 1:
            raise DomainError("horizon and paths must be positive")
        if self.b_star.d != self.model.d:
            raise DomainError("b_star and model disagree on the number of assets")
        if isinstance(self.competitor, Portfolio) and self.competitor.d != self.model.d:
            raise DomainError("competitor and model disagree on the number of assets")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")


@dataclass
class CheckReport:
    """Outcome of one check.

    ``rows`` are ``(n, statistic, value, bound)`` tuples, ``bound`` being None
    where nothing is asserted.
    """

    check: str
    passed: bool
    rows: list[tuple[int, str, float, float | None]] = field(default_factory=list)
    summary: str = ""
    details: dict = field(default_factory=dict)

    def csv_rows(self) -> list[list[str]]:
        return [
            [self.check, str(n), stat, repr(float(value)), "" if bound is None else repr(float(bound))]
            for n, stat, value, bound in self.rows
        ]


def _path_seeds(seed: int, paths: int):
    return np.random.SeedSequence(seed).spawn(paths)


def _draw_path(model, n, seed_seq):
    x, _ = sample_nd_nonnegative(model, np.random.default_rng(seed_seq), n)
    return x


def _iter_paths(model, n, paths, seed, workers=1) -> Iterator[np.ndarray]:
    seeds = _path_seeds(seed, paths)
    if workers == 1:
        for s in seeds:
            yield _draw_path(model, n, s)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map keeps submission order, so the stream is the same for any worker count
        chunk = 4 * workers
        for start in range(0, paths, chunk):
            yield from pool.map(lambda s: _draw_path(model, n, s), seeds[start : start + chunk])


def simulate_market(model: MultivariateQGaussian, n: int, paths: int, seed: int, workers: int = 1) -> np.ndarray:
    """Simulate ``paths`` independent ``n``-day markets, shape ``(paths, n, d)``.

    Draws with a negative coordinate are rejected and redrawn, as in the
    optimizer's Monte Carlo path.
    """
    if n < 1 or paths < 1:
        raise DomainError("n and paths must be positive")
    _check_samplable(model.q, model.d)
    return np.stack(list(_iter_paths(model, n, paths, seed, workers)))


def reference_growth_rate(run: SimulationRun) -> float:
    """``W_q(b_star)`` by tight quadrature (or ``run.w_star`` if set)."""
    if run.w_star is not None:
        return float(run.w_star)
    method = "adaptive_quadrature_1d" if run.model.d == 1 else "cubature_nd"
    spec = IntegratorSpec(method, rel_tol=1e-9, abs_tol=1e-13)
    return growth_q_rate(run.b_star, run.model, spec).value


def _competitor_factors(competitor, x):
    if competitor is None:
        raise DomainError("this check needs a competitor portfolio or strategy")
    if isinstance(competitor, Portfolio):
        return x @ competitor.as_array()
    out = np.empty(len(x))
    for i in range(len(x)):
        w = competitor(x[:i])
        w = w.as_array() if isinstance(w, Portfolio) else Portfolio(w).as_array()
        out[i] = x[i] @ w
    return out


def _bracket(q, a):
    # base of the q-exponential power; <= 0 means cutoff (q < 1) or pole (q > 1)
    return np.ones_like(a) if is_classical(q) else 1.0 + (1.0 - q) * a


def _log_qwealth(q, a):
    """``ln S`` for ``S = exp_q(a)``; -inf at a cutoff, +inf at the pole."""
    if is_classical(q):
        return np.asarray(a, dtype=float)
    br = _bracket(q, a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(np.where(br > 0, br, 1.0)) / (1.0 - q)
    return np.where(br > 0, out, -np.inf if q < 1 else np.inf)


def check_lln(run: SimulationRun, checkpoints: Sequence[int] = LLN_CHECKPOINTS) -> CheckReport:
    """Per-path rate ``(1/n) ln_q S*_n`` against ``W*_q`` at each checkpoint.

    The rate equals ``A_n / n`` (the q-log of a q-product is the sum of
    q-logs); the report also verifies ``S*_n == exp_q(A_n)`` path by path.
    The check passes when, at the last checkpoint, the mean rate lies within
    three standard errors of ``W*_q``.
    """
    checkpoints = sorted(int(n) for n in checkpoints if n <= run.horizon)
    if not checkpoints:
        raise DomainError("no checkpoint within the horizon")
    q = run.model.q
    w_star = reference_growth_rate(run)
    b = run.b_star.as_array()
    idx = np.array(checkpoints) - 1
    rates = np.empty((run.paths, len(checkpoints)))
    identity_err = 0.0
    saturated = 0
    for p, x in enumerate(_iter_paths(run.model, run.horizon, run.paths, run.seed, run.workers)):
        factors = x @ b
        a = np.cumsum(_lnq(q, factors))
        rates[p] = a[idx] / np.array(checkpoints)
        # S*_n by folding the factors directly, compared in q-log space
        s_n = _expq(q, a[-1])
        if np.isfinite(s_n) and s_n > 0:
            identity_err = max(identity_err, abs(float(q_log(q, s_n)) - a[-1]) / max(1.0, abs(a[-1])))
        else:
            saturated += 1

    rows = []
    mad, spread = [], []
    for j, n in enumerate(checkpoints):
        r = rates[:, j]
        se = float(np.std(r, ddof=1) / math.sqrt(run.paths)) if run.paths > 1 else 0.0
        dev = float(np.mean(r)) - w_star
        mad.append(float(np.mean(np.abs(r - w_star))))
        p10, p90 = np.percentile(r, [10, 90])
        spread.append(float(p90 - p10))
        rows += [
            (n, "mean_rate", float(np.mean(r)), None),
            (n, "abs_mean_deviation", abs(dev), 3.0 * se),
            (n, "mean_abs_deviation", mad[-1], None),
            (n, "spread_p90_p10", spread[-1], None),
        ]
    last_dev = rows[-3][2]
    last_bound = rows[-3][3]
    passed = last_dev <= last_bound or last_dev == 0.0
    rows.append((checkpoints[-1], "w_star", w_star, None))
    rows.append((run.horizon, "identity_max_rel_error", identity_err, 1e-9))
    rows.append((run.horizon, "saturated_paths", float(saturated), None))
    shrinking = all(b <= a for a, b in zip(spread, spread[1:]))
    summary = (
        f"LLN: |mean rate - W*| = {last_dev:.3e} vs 3 SE = {last_bound:.3e} at n={checkpoints[-1]} "
        f"over {run.paths} paths ({'PASS' if passed else 'FAIL'}); "
        f"spread {'shrinks' if shrinking else 'does not shrink'} across checkpoints"
    )
    return CheckReport(
        "lln",
        passed,
        rows,
        summary,
        {"w_star": w_star, "rates": rates, "spread": spread, "mad": mad,
         "identity_max_rel_error": identity_err, "saturated_paths": saturated,
         "spread_shrinks": shrinking},
    )


def check_markov_bound(run: SimulationRun, lambdas: Sequence[float] = (2.0, 5.0, 10.0)) -> CheckReport:
    """Exceedance frequency of ``S_n / S*_n > lam`` at ``n = run.horizon``.

    Each frequency is compared with ``1/lam + 3 SE`` where SE is the binomial
    standard error at success probability ``min(1/lam, 1)``.  The sample mean
    of ``S_n / S*_n`` is reported as well; a mean above one (beyond three
    standard errors) is logged as a warning but does not fail the check.
    """
    lambdas = [float(v) for v in lambdas]
    if any(not v >= 1 for v in lambdas):
        raise DomainError("lambdas must be >= 1")
    q = run.model.q
    b = run.b_star.as_array()
    log_ratio = np.empty(run.paths)
    for p, x in enumerate(_iter_paths(run.model, run.horizon, run.paths, run.seed, run.workers)):
        a_star = float(np.sum(_lnq(q, x @ b)))
        a = float(np.sum(_lnq(q, _competitor_factors(run.competitor, x))))
        ls, lc = _log_qwealth(q, a_star), _log_qwealth(q, a)
        log_ratio[p] = 0.0 if ls == lc else lc - ls
    log_ratio = np.where(np.isnan(log_ratio), 0.0, log_ratio)

    rows = []
    passed = True
    for lam in lambdas:
        freq = float(np.mean(log_ratio > math.log(lam)))
        p0 = min(1.0 / lam, 1.0)
        bound = 1.0 / lam + 3.0 * math.sqrt(p0 * (1.0 - p0) / run.paths)
        passed &= freq <= bound
        rows.append((run.horizon, f"exceedance_freq_lambda_{lam:g}", freq, bound))
    with np.errstate(over="ignore"):
        ratio = np.exp(log_ratio)
    mean_ratio = float(np.mean(ratio))
    finite = np.isfinite(mean_ratio) and run.paths > 1
    se = float(np.std(ratio, ddof=1) / math.sqrt(run.paths)) if finite else 0.0
    rows.append((run.horizon, "mean_wealth_ratio", mean_ratio, None))
    rows.append((run.horizon, "saturated_competitor_paths", float(np.sum(np.isposinf(log_ratio))), None))
    if not mean_ratio <= 1.0 + 3.0 * se:
        log.warning("mean q-wealth ratio %.6g exceeds 1 by more than 3 SE (%.3g)", mean_ratio, se)
    summary = (
        f"Markov: exceedance frequencies {[round(r[2], 6) for r in rows[:-1]]} for lambda={lambdas} "
        f"over {run.paths} paths, n={run.horizon} ({'PASS' if passed else 'FAIL'}); "
        f"mean S/S* = {mean_ratio:.6g}"
    )
    return CheckReport("markov", bool(passed), rows, summary,
                       {"log_ratio": log_ratio, "mean_ratio": mean_ratio, "mean_ratio_se": se})


def finite_n_rhs(q: float, n):
    """Right side ``ln_q(n**2) / n`` of the finite-n bound."""
    n = np.asarray(n, dtype=float)
    return _lnq(q, n * n) / n


def check_finite_n_bound(run: SimulationRun, n0: int = N0) -> CheckReport:
    """Count days ``n0 <= n <= horizon`` where ``(1/n) ln_q(S_n/S*_n)`` exceeds ``ln_q(n**2)/n``.

    ``ln_q`` is increasing, so the inequality is ``S_n <= n**2 S*_n`` and is
    evaluated on log q-wealths.  For ``q > 1`` it therefore fails as the
    competitor's q-wealth approaches its pole.  A (path, n) pair where both
    wealths are infinite (or both zero) is undefined and counted apart.

    Reports the share of paths with at least one violation, the share where
    the bound holds at every ``n >= n0`` with no undefined day, the mean
    number of violations per path (compared with the Borel-Cantelli budget
    ``sum 1/n**2 <= pi**2/6``) and the number of undefined pairs.  Passes
    when the mean violation count stays within the budget.
    """
    q = run.model.q
    if not q > 0.5:
        raise DomainError(f"the finite-n bound needs q > 0.5, got q={q}")
    if run.horizon < n0:
        raise DomainError(f"horizon {run.horizon} is shorter than N0={n0}")
    b = run.b_star.as_array()
    ns = np.arange(n0, run.horizon + 1, dtype=float)
    log_rhs = 2.0 * np.log(ns)
    violations = np.zeros(run.paths, dtype=int)
    undefined_days = np.zeros(run.paths, dtype=int)
    worst = -math.inf
    for p, x in enumerate(_iter_paths(run.model, run.horizon, run.paths, run.seed, run.workers)):
        ls = _log_qwealth(q, np.cumsum(_lnq(q, x @ b))[n0 - 1 :])
        lc = _log_qwealth(q, np.cumsum(_lnq(q, _competitor_factors(run.competitor, x)))[n0 - 1 :])
        bad = (ls == lc) & np.isinf(ls)
        with np.errstate(invalid="ignore"):
            excess = np.where(bad, np.nan, lc - ls) - log_rhs
        undefined_days[p] = int(bad.sum())
        violations[p] = int(np.sum(excess[~bad] > 0))
        if np.any(~bad):
            worst = max(worst, float(np.max(excess[~bad])))

    frac = float(np.mean(violations > 0))
    holds = float(np.mean((violations == 0) & (undefined_days == 0)))
    mean_v = float(np.mean(violations))
    undefined = int(undefined_days.sum())
    tail_budget = float(np.sum(1.0 / ns**2))
    passed = mean_v <= BASEL
    rows = [
        (run.horizon, "violating_path_fraction", frac, None),
        (run.horizon, "holding_path_fraction", holds, None),
        (run.horizon, "mean_violations_per_path", mean_v, BASEL),
        (run.horizon, "tail_budget_sum_inv_n2", tail_budget, None),
        (run.horizon, "max_log_ratio_minus_2ln_n", worst, 0.0),
        (run.horizon, "undefined_cases", float(undefined), None),
    ]
    summary = (
        f"finite-n bound: holds for every n in [{n0}, {run.horizon}] on {holds:.2%} of {run.paths} paths, "
        f"violated on {frac:.2%}; mean violations per path {mean_v:.4g} vs budget pi^2/6 "
        f"({'PASS' if passed else 'FAIL'}); {undefined} undefined cases"
    )
    return CheckReport("bound", passed, rows, summary,
                       {"violations": violations, "violating_path_fraction": frac,
                        "holding_path_fraction": holds, "undefined": undefined, "n0": n0})
