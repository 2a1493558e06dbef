"""EVaR portfolio toolkit for jump-diffusion return models."""

from ._core import (  # noqa: F401
    EvarResult,
    EvarSolution,
    EvarportError,
    FitResult,
    FrontierPoint,
    KktReport,
    Model1Params,
    Model2Params,
    Multipliers,
    Portfolio,
    PriceSeries,
    ReturnSample,
    TruncationPolicy,
    __version__,
    covariance_model1,
    covariance_model2,
    density_model1,
    density_model2,
    efficient_frontier,
    evar_analytic,
    evar_empirical,
    fit_els,
    frontier_to_csv,
    laplace_exponent_model1,
    laplace_exponent_model2,
    load_prices,
    mean_model1,
    mean_model2,
    sample_model1,
    sample_model2,
    solve_evar,
    solve_min_variance,
    stdev_portfolio,
    to_log_returns,
    var_empirical,
)
