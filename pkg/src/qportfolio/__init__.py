"""Growth-optimal portfolios under q-Gaussian (Tsallis) price relatives."""

from .errors import (
    DataError,
    DomainError,
    OptimizationFailedError,
    QPortfolioError,
    UndefinedMetricError,
    UnsupportedError,
)
from .estimation import FitConfig, FitResult, fit_mle
from .ingest import PriceRelativeSeries, load_prices
from .numerics import DEConfig, IntegratorSpec, differential_evolution, integrate
from .optimizer import GrowthRateEstimate, Portfolio, growth_q_rate, optimal_portfolio
from .qalgebra import q_exp, q_log, q_product, q_product_fold, tsallis_entropy
from .qgaussian import (
    MultivariateQGaussian,
    UnivariateQGaussian,
    c_dq,
    c_q,
    density_1d,
    density_nd,
    log_likelihood,
    sample_1d,
    sample_nd,
)
from .wealth_metrics import WealthTrajectory, sharpe_ratio, sortino_ratio, wealth_relative

__version__ = "0.1.0"
