import numpy as np
import pytest
from scipy import integrate, stats

from qportfolio.numerics import IntegratorSpec
from qportfolio.numerics import integrate as q_integrate
from qportfolio.qgaussian import density_1d, density_nd

ACCEPTANCE_LINES: list[str] = []


def quadrature_cdf(model, points, grid_size=8001):
    """CDF of a 1-d model at ``points`` by quadrature on a grid, then linear interpolation.

    The grid is uniform in ``arctan((x - mu) / sigma)`` so that heavy-tailed
    samples spanning many scales still get a fine mesh near the centre.
    """
    points = np.asarray(points, dtype=float)
    z = (points - model.mu) / model.sigma
    u = np.linspace(np.arctan(z.min()), np.arctan(z.max()), grid_size)
    grid = model.mu + model.sigma * np.tan(u)
    pdf = lambda x: density_1d(model, x)
    head, _ = integrate.quad(pdf, -np.inf, grid[0], epsabs=1e-13, epsrel=1e-12, limit=200)
    steps = [integrate.quad(pdf, a, b, epsabs=1e-14, epsrel=1e-12)[0] for a, b in zip(grid[:-1], grid[1:])]
    cdf = head + np.concatenate([[0.0], np.cumsum(steps)])
    return np.interp(points, grid, cdf)


def chi2_grid_pvalue(model, sample, edges):
    """Pearson chi^2 of a 2-d histogram on ``edges`` (plus one outer cell) against cubature cell masses."""
    spec = IntegratorSpec("cubature_nd", rel_tol=1e-9, abs_tol=1e-12)
    probs = []
    for i in range(len(edges[0]) - 1):
        for j in range(len(edges[1]) - 1):
            box = [(edges[0][i], edges[0][i + 1]), (edges[1][j], edges[1][j + 1])]
            probs.append(q_integrate(lambda x: density_nd(model, x), box, spec, vectorized=True).value)
    probs = np.array(probs)
    counts, _, _ = np.histogram2d(sample[:, 0], sample[:, 1], bins=edges)
    obs = np.append(counts.ravel(), len(sample) - counts.sum())
    exp = len(sample) * np.append(probs, 1 - probs.sum())
    chi2 = np.sum((obs - exp) ** 2 / exp)
    return stats.chi2.sf(chi2, len(obs) - 1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
