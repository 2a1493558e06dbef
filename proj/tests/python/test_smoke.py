"""Smoke tests for the Python extension module."""

import math

import numpy as np
import pytest

try:
    import evarport as ev
except ImportError:  # running against the bare build tree
    import _core as ev


@pytest.fixture(scope="module")
def model2():
    return ev.Model2Params(
        mu_tilde=np.array([0.004, -0.002]),
        Q=np.array([[5e-4, 1e-4], [1e-4, 3e-4]]),
        lambda_=0.7,
        mu=np.array([-0.012, 0.006]),
        A=np.array([[2e-4, 4e-5], [4e-5, 1.2e-4]]),
    )


def test_gaussian_closed_form():
    p = ev.Model2Params(
        mu_tilde=np.array([0.0]),
        Q=np.array([[1.0]]),
        lambda_=0.0,
        mu=np.array([0.0]),
        A=np.array([[0.0]]),
    )
    result = ev.evar_analytic(p, np.array([1.0]), 0.05)
    assert result.converged
    assert result.value == pytest.approx(math.sqrt(-2.0 * math.log(0.05)), abs=1e-8)


def test_moments_and_sampling(model2):
    mean = ev.mean_model2(model2)
    cov = ev.covariance_model2(model2)
    assert mean.shape == (2,)
    assert cov.shape == (2, 2)
    sample = ev.sample_model2(model2, 20000, seed=3)
    assert sample.returns.shape == (20000, 2)
    emp_mean = sample.returns.mean(axis=0)
    assert np.allclose(emp_mean, mean, atol=4.0 * np.sqrt(np.diag(cov) / 20000))


def test_empirical_risk_agrees(model2):
    sample = ev.sample_model2(model2, 200000, seed=4)
    w = np.array([0.5, 0.5])
    analytic = ev.evar_analytic(model2, w, 0.05).value
    empirical = ev.evar_empirical(sample, w, 0.05).value
    assert empirical == pytest.approx(analytic, rel=0.05)
    var = ev.var_empirical(sample, w, 0.05)
    assert var <= empirical


def test_solver_and_frontier(model2):
    means = ev.mean_model2(model2)
    target = float(means.min() + 0.6 * (means.max() - means.min()))
    sol = ev.solve_evar(model2, 0.05, target)
    assert sol.kkt.stationarity_inf_norm <= 1e-6
    assert sol.portfolio.weights.sum() == pytest.approx(1.0, abs=1e-10)

    targets = np.linspace(means.min(), means.max(), 5)[1:-1]
    points = ev.efficient_frontier(model2, 0.05, [float(t) for t in targets], risk="evar")
    assert len(points) == 3
    assert all(pt.converged for pt in points)
    csv = ev.frontier_to_csv(points)
    assert csv.splitlines()[0] == "target_return,evar,stdev,s_star,w_1,w_2"

    mv = ev.solve_min_variance(ev.covariance_model2(model2), means, target)
    assert mv.weights.min() >= -1e-12


def test_density_and_laplace(model2):
    one = ev.Model2Params(
        mu_tilde=np.array([0.001]),
        Q=np.array([[4e-4]]),
        lambda_=0.5,
        mu=np.array([0.01]),
        A=np.array([[1e-4]]),
    )
    x = np.linspace(-0.15, 0.16, 3001)
    values = [ev.density_model2(one, np.array([xi])) for xi in x]
    assert all(v >= 0.0 for v in values)
    integrate = getattr(np, "trapezoid", np.trapz)
    assert integrate(values, x) == pytest.approx(1.0, abs=1e-4)
    assert ev.laplace_exponent_model2(one, np.array([0.0])) == 0.0


def test_fit_els_roundtrip(model2):
    sample = ev.sample_model2(model2, 1500, seed=9)
    fit = ev.fit_els(sample, model="model2", starts=4)
    assert fit.n_obs == 1500
    assert np.allclose(fit.implied_mean, fit.sample_mean, atol=1e-4)
    text = fit.to_json()
    assert '"model": 2' in text
    back = ev.Model2Params.from_json(text)
    assert back.n == 2


def test_json_and_errors(model2):
    text = model2.to_json()
    back = ev.Model2Params.from_json(text)
    assert np.allclose(back.Q, model2.Q)
    with pytest.raises(ev.EvarportError):
        ev.Model2Params.from_json("{broken")
    with pytest.raises(ev.EvarportError):
        ev.evar_analytic(model2, np.array([0.5, 0.5]), 1.5)


def test_price_ingestion(tmp_path):
    csv = tmp_path / "prices.csv"
    csv.write_text(
        "date,a,b\n2020-01-01,100.0,50.0\n2020-01-08,101.0,49.5\n2020-01-15,103.0,50.5\n"
    )
    series = ev.load_prices(str(csv))
    assert series.asset_names == ["a", "b"]
    returns = ev.to_log_returns(series)
    assert returns.returns.shape == (2, 2)
    assert returns.returns[0, 0] == pytest.approx(math.log(101.0 / 100.0))
