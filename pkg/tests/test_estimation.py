import numpy as np
import pytest

from qportfolio.errors import DataError, DomainError
from qportfolio.estimation import FitConfig, fit_mle, gaussian_baseline_config
from qportfolio.ingest import PriceRelativeSeries
from qportfolio.numerics import DEConfig
from qportfolio.qgaussian import MultivariateQGaussian, sample_nd_nonnegative


def synthetic(q, mu, sigma, n, seed):
    m = MultivariateQGaussian(q, mu, sigma)
    x, _ = sample_nd_nonnegative(m, np.random.default_rng(seed), n)
    return PriceRelativeSeries.from_array(x)


@pytest.fixture(scope="module")
def one_d_data():
    return synthetic(1.5, [1.0], [0.02], 5000, seed=11)


@pytest.fixture(scope="module")
def one_d_fit(one_d_data):
    return fit_mle(one_d_data)


def test_recovers_univariate_parameters(one_d_fit):
    m = one_d_fit.model
    assert abs(m.q - 1.5) <= 0.1
    assert abs(m.mu[0] - 1.0) <= 0.002
    assert m.sigma[0] == pytest.approx(0.02, rel=0.1)


def test_gaussian_data_gives_small_q():
    x = 1.0 + 0.02 / np.sqrt(2) * np.random.default_rng(5).standard_normal((5000, 1))
    fit = fit_mle(PriceRelativeSeries.from_array(x))
    assert fit.model.q <= 1.15


def test_beats_gaussian_baseline(one_d_data, one_d_fit):
    base = fit_mle(one_d_data, gaussian_baseline_config())
    assert one_d_fit.log_likelihood >= base.log_likelihood - 1e-6


def test_observation_order_does_not_matter(one_d_data, one_d_fit):
    perm = np.random.default_rng(0).permutation(one_d_data.n)
    shuffled = PriceRelativeSeries.from_array(one_d_data.relatives[perm])
    fit = fit_mle(shuffled)
    assert fit.log_likelihood == pytest.approx(one_d_fit.log_likelihood, rel=1e-10)
    np.testing.assert_allclose(
        [fit.model.q, *fit.model.mu, *fit.model.sigma],
        [one_d_fit.model.q, *one_d_fit.model.mu, *one_d_fit.model.sigma],
        rtol=1e-6,
    )


def test_scaling_equivariance():
    data = synthetic(1.4, [1.0, 1.0], [0.02, 0.03], 2000, seed=3)
    cfg = FitConfig(de=DEConfig(max_generations=600))
    base = fit_mle(data, cfg)
    c = 2.0
    scaled = PriceRelativeSeries.from_array(data.relatives * [c, 1.0])
    cfg_c = FitConfig(
        mu_bounds=((0.8 * c, 1.2 * c), (0.8, 1.2)),
        sigma_bounds=((1e-4 * c, 0.5 * c), (1e-4, 0.5)),
        de=cfg.de,
    )
    fit = fit_mle(scaled, cfg_c)
    assert fit.model.q == pytest.approx(base.model.q, abs=0.02)
    assert fit.model.sigma[0] == pytest.approx(c * base.model.sigma[0], rel=0.02)
    assert fit.model.mu[0] == pytest.approx(c * base.model.mu[0], rel=1e-3)


def test_constant_ticker_is_named():
    x = np.column_stack([np.full(50, 1.01), np.linspace(0.99, 1.01, 50)])
    with pytest.raises(DataError, match="X1"):
        fit_mle(PriceRelativeSeries.from_array(x, tickers=["X1", "X2"]))


def test_too_few_observations():
    with pytest.raises(DataError):
        fit_mle(synthetic(1.5, [1.0], [0.02], 29, seed=0))


def test_reports_non_convergence():
    fit = fit_mle(synthetic(1.5, [1.0], [0.02], 200, seed=0), FitConfig(de=DEConfig(max_generations=2)))
    assert not fit.converged
    assert len(fit.trace) == 3


def test_result_carries_tickers_and_window(one_d_fit, one_d_data):
    assert one_d_fit.tickers == one_d_data.tickers
    assert one_d_fit.window == (one_d_data.dates[0].isoformat(), one_d_data.dates[-1].isoformat())


def test_default_q_cap_respects_dimension():
    cfg = FitConfig().resolve(4)
    assert cfg.q_bounds[1] < 1.5
    assert FitConfig().resolve(1).q_bounds == (1.01, 2.2)


@pytest.mark.parametrize(
    "cfg",
    [
        FitConfig(q_bounds=(0.9, 1.5)),
        FitConfig(q_bounds=(1.1, 2.0)),
        FitConfig(sigma_bounds=((0.0, 0.1), (0.0, 0.1))),
        FitConfig(mu_bounds=((1.2, 0.8),) * 2),
    ],
)
def test_fit_config_validation(cfg):
    with pytest.raises(DomainError):
        cfg.resolve(2)


def test_fit_config_round_trip():
    cfg = FitConfig(q_bounds=(1.1, 1.6), mu_bounds=((0.9, 1.1),), sigma_bounds=((1e-3, 0.2),), de=DEConfig(seed=3))
    assert FitConfig.from_dict(cfg.to_dict()) == cfg
