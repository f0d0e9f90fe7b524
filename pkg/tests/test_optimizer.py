import numpy as np
import pytest

from inflation_dynamics import synth
from inflation_dynamics.errors import DataError, InfeasibleError
from inflation_dynamics.optimizer import (
    PortfolioSpec,
    WeightTrajectory,
    WindowEstimates,
    estimate_window,
    portfolio_objective,
    project_box_simplex,
    rolling_optimize,
    sensitivity_sweep,
    solve_weights,
    weight_stats,
    write_stats_csv,
    write_sweep_csv,
    write_trajectory_csv,
)
from inflation_dynamics.panel import ReturnsPanel, log_returns
from oracles import box_simplex_projection_kkt, covariance_two_pass, portfolio_grid


def returns_panel(X, names=None):
    names = names or tuple(f"A{k}" for k in range(X.shape[1]))
    return ReturnsPanel(synth.business_dates((2016, 1, 4), len(X)), names, X, "daily")


def assert_feasible(w, spec):
    assert abs(w.sum() - 1) < 1e-8
    assert w[0] == spec.fixed_core_weight
    assert np.all(w[1:] >= np.array(spec.lower) - 1e-8)
    assert np.all(w[1:] <= np.array(spec.upper) + 1e-8)


# --- estimation


def test_constant_returns():
    est = estimate_window(np.full((30, 3), 0.002), 30, 30)
    np.testing.assert_allclose(est.mu, 0.002)
    np.testing.assert_allclose(est.cov, 0.0, atol=1e-20)


def test_perfectly_correlated_assets():
    x = np.random.default_rng(0).normal(0, 0.01, 60)
    est = estimate_window(np.column_stack([x, 3 * x + 0.1]), 60, 60)
    sd = np.sqrt(np.diag(est.cov))
    assert abs(est.cov[0, 1] - sd[0] * sd[1]) < 1e-12


def test_estimates_match_two_pass_oracle():
    R = synth.portfolio_instance(seed=1, n_assets=5, window=300)
    est = estimate_window(R, 280, 250)
    mu, cov = covariance_two_pass(R[30:280])
    np.testing.assert_allclose(est.mu, mu, rtol=0, atol=1e-12)
    np.testing.assert_allclose(est.cov, cov, rtol=0, atol=1e-12)
    assert np.array_equal(est.cov, est.cov.T)


def test_insufficient_history():
    with pytest.raises(DataError):
        estimate_window(np.zeros((10, 2)), 5, 6)


# --- projection


@pytest.mark.parametrize("seed", range(25))
def test_projection_matches_kkt_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    lo = rng.uniform(0, 0.1, n)
    hi = lo + rng.uniform(0.05, 0.4, n)
    total = rng.uniform(lo.sum(), hi.sum())
    y = rng.normal(0, 0.5, n)
    x = project_box_simplex(y, lo, hi, total)
    np.testing.assert_allclose(x, box_simplex_projection_kkt(y, lo, hi, total), atol=1e-8)
    assert abs(x.sum() - total) < 1e-12


def test_projection_of_feasible_point_is_identity():
    x = np.array([0.1, 0.2, 0.3])
    np.testing.assert_allclose(project_box_simplex(x, 0.0, 0.5, 0.6), x, atol=1e-15)


# --- single solve


def test_dominant_asset_saturates_upper_bound():
    est = WindowEstimates(np.array([0.0, 0.02, 0.001]), np.diag([1e-4, 1e-4, 1e-4]))
    spec = PortfolioSpec(("CORE", "X", "Y"), 0.4, 0.1, 0.45)
    w, f = solve_weights(est, spec)
    assert w[1] == pytest.approx(0.45, abs=1e-8)
    # fine grid oracle over the single free degree of freedom
    xs = np.arange(0.15, 0.45 + 1e-12, 0.0005)
    vals = [portfolio_objective([0.4, x, 0.6 - x], est, spec) for x in xs]
    assert xs[int(np.argmax(vals))] == pytest.approx(0.45)
    assert f >= max(vals) - 1e-12 * abs(f)


def test_identical_assets_feasible():
    x = np.random.default_rng(2).normal(0.001, 0.01, 250)
    est = estimate_window(np.tile(x[:, None], 5), 250, 250)
    spec = PortfolioSpec(tuple("ABCDE"), 0.4, 0.05, 0.3)
    w, f = solve_weights(est, spec)
    assert_feasible(w, spec)
    eq = np.array([0.4, 0.15, 0.15, 0.15, 0.15])
    assert f == pytest.approx(portfolio_objective(eq, est, spec), rel=1e-9)


@pytest.mark.parametrize("objective", ["variance", "stdev"])
@pytest.mark.parametrize("seed", range(8))
def test_grid_oracle_quality(seed, objective):
    R = synth.portfolio_instance(seed=seed)
    est = estimate_window(R, 250, 250)
    spec = PortfolioSpec(tuple("ABCD"), 0.4, 0.025, 0.3, 0.0025, objective=objective)
    w, f = solve_weights(est, spec)
    assert_feasible(w, spec)
    g, _ = portfolio_grid(est.mu, est.cov, 0.4, 0.025, 0.3, 0.0025, objective=objective)
    assert f >= g - 1e-4 * abs(g)


def test_scale_invariance_of_argmax():
    R = synth.portfolio_instance(seed=3)
    spec = PortfolioSpec(tuple("ABCD"), 0.4, 0.025, 0.3, 0.0025)
    w1, f1 = solve_weights(estimate_window(R, 250, 250), spec)
    c = 2.5
    spec_c = PortfolioSpec(tuple("ABCD"), 0.4, 0.025, 0.3, c * 0.0025)
    w2, f2 = solve_weights(estimate_window(c * R, 250, 250), spec_c)
    np.testing.assert_allclose(w1, w2, atol=1e-6)
    assert f2 == pytest.approx(f1 / c, rel=1e-8)


def test_infeasible_and_invalid_specs():
    with pytest.raises(InfeasibleError):
        PortfolioSpec(tuple("ABCDEFG"), 0.9).check_feasible()
    with pytest.raises(InfeasibleError):
        PortfolioSpec(("A",))
    with pytest.raises(InfeasibleError):
        PortfolioSpec(tuple("ABC"), lower=(0.1,))
    with pytest.raises(ValueError):
        PortfolioSpec(tuple("ABC"), objective="sharpe")


# --- rolling


def test_single_window_trajectory():
    R = synth.portfolio_instance(seed=4, window=251)
    spec = PortfolioSpec(tuple("ABCD"))
    traj = rolling_optimize(returns_panel(R, tuple("ABCD")), spec)
    assert traj.weights.shape == (1, 4)
    w, f = solve_weights(estimate_window(R, 250, 250), spec)
    np.testing.assert_allclose(traj.weights[0], w, atol=1e-9)
    assert traj.objective[0] == pytest.approx(f, rel=1e-10)


def test_too_short_panel():
    R = synth.portfolio_instance(seed=4, window=250)
    with pytest.raises(DataError):
        rolling_optimize(returns_panel(R, tuple("ABCD")), PortfolioSpec(tuple("ABCD")))


@pytest.fixture(scope="module")
def asset_returns():
    return log_returns(synth.asset_prices(seed=3, n_days=290))


def test_rolling_feasible_and_warm_equals_cold(asset_returns):
    spec = PortfolioSpec(synth.ASSETS)
    warm = rolling_optimize(asset_returns, spec)
    cold = rolling_optimize(asset_returns, spec, cold_start=True)
    assert len(warm.dates) == len(asset_returns.dates) - 250
    assert warm.dates[0] == asset_returns.dates[250]
    for w in warm.weights:
        assert_feasible(w, spec)
    assert np.abs(warm.weights - cold.weights).max() < 1e-6


def test_stationary_weights_steadier_than_permuted_control():
    # paired simulation: the control re-orders one asset's returns in time (sorted),
    # keeping its marginal distribution but making the window estimates drift
    spec = PortfolioSpec(tuple("ABCD"), 0.4, 0.025, 0.4)
    steadier = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        R = rng.multivariate_normal([0.001, 0.0008, 0.0012, 0.0009], np.diag([1, 1.5, 2, 1.2]) * 1e-4, size=330)
        control = R.copy()
        control[:, 2] = np.sort(control[:, 2])
        v_stat = weight_stats(rolling_optimize(returns_panel(R, tuple("ABCD")), spec)).variance
        v_ctrl = weight_stats(rolling_optimize(returns_panel(control, tuple("ABCD")), spec)).variance
        steadier += v_stat[1:].sum() < v_ctrl[1:].sum()
    assert steadier >= 8


# --- statistics and sweep


def _traj(W):
    W = np.asarray(W, float)
    return WeightTrajectory(("c", "x"), tuple((2020, 1, k + 1) for k in range(len(W))), W, np.zeros(len(W)))


def test_weight_stats_examples():
    s = weight_stats(_traj([[0.5, 0.5]] * 4))
    assert np.all(s.variance == 0)
    alt = weight_stats(_traj([[0.5, 0.1], [0.5, 0.3]] * 3))
    assert alt.mean[1] == pytest.approx(0.2, abs=1e-15)
    assert alt.variance[1] == pytest.approx(0.01, abs=1e-15)
    with pytest.raises(DataError):
        weight_stats(_traj(np.empty((0, 2))))


def test_weight_stats_direct_formula():
    W = np.random.default_rng(5).uniform(size=(40, 3))
    s = weight_stats(WeightTrajectory(tuple("abc"), tuple(range(40)), W, np.zeros(40)))
    for a in range(3):
        col = W[:, a].tolist()
        m = sum(col) / len(col)
        assert abs(s.mean[a] - m) < 1e-14
        assert abs(s.variance[a] - sum((v - m) ** 2 for v in col) / len(col)) < 1e-14


def test_sweep_singleton_and_infeasible_row(asset_returns, tmp_path, caplog):
    spec = PortfolioSpec(synth.ASSETS)
    with caplog.at_level("WARNING"):
        rows = sensitivity_sweep(asset_returns, spec, [0.4, 0.9])
    direct = weight_stats(rolling_optimize(asset_returns, spec))
    np.testing.assert_array_equal(rows[0].stats.mean, direct.mean)
    assert not rows[1].feasible and "infeasible" in caplog.text
    write_sweep_csv(rows, spec.assets, tmp_path / "sweep.csv")
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "core_weight,asset,mean_weight"
    assert len(lines) == 1 + 2 * len(spec.assets)
    assert lines[-1].endswith(",infeasible")


def test_writers(tmp_path):
    R = synth.portfolio_instance(seed=6, window=253)
    traj = rolling_optimize(returns_panel(R, tuple("ABCD")), PortfolioSpec(tuple("ABCD")))
    write_trajectory_csv(traj, tmp_path / "w.csv")
    write_stats_csv(weight_stats(traj), tmp_path / "s.csv")
    assert (tmp_path / "w.csv").read_text().splitlines()[0] == "date,A,B,C,D,objective"
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 5
