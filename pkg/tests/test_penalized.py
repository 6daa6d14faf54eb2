import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from oracles import normal_equations, orthonormal_design, scad_1d_grid
from oracles import soft_threshold as soft_oracle
from sisselect.exceptions import BadSpec, ConvergenceWarning
from sisselect.penalized import (Penalty, PenaltySpec, SolverConfig, adaptive_lasso_fit,
                                 bic_select, default_lambda_grid, fit_path, kkt_violation,
                                 lambda_max, lla_fit, lla_init, penalty_deriv, penalty_value,
                                 weighted_lasso_cd)

SCAD = PenaltySpec(Penalty.SCAD, lam=1.0, a=3.7)
TIGHT = SolverConfig(tol=1e-12, max_inner=100_000, max_outer=200)


@pytest.mark.parametrize("t, expected", [(0.0, 1.0), (0.5, 1.0), (1.0, 1.0),
                                         (2.0, 1.7 / 2.7), (3.7, 0.0), (4.0, 0.0)])
def test_scad_derivative_examples(t, expected):
    assert penalty_deriv(SCAD, t) == pytest.approx(expected)


def test_scad_plateau_value():
    assert penalty_value(SCAD, 10.0) == pytest.approx(4.7 / 2)
    assert penalty_value(SCAD, 0.5) == pytest.approx(0.5)


def test_mcp_examples():
    mcp = PenaltySpec(Penalty.MCP, lam=1.0, a=2.0)
    assert penalty_deriv(mcp, 2.0) == 0.0
    assert penalty_deriv(mcp, 0.0) == pytest.approx(1.0)
    assert penalty_value(mcp, 5.0) == pytest.approx(1.0)


@pytest.mark.parametrize("spec", [SCAD, PenaltySpec(Penalty.MCP, lam=0.7, a=2.5),
                                  PenaltySpec(Penalty.L1, lam=0.3)])
@pytest.mark.parametrize("t", [0.2, 0.9, 1.5, 3.0, 6.0])
def test_value_is_integral_of_derivative(spec, t):
    integral, _ = quad(lambda s: penalty_deriv(spec, s), 0.0, t, points=[spec.lam, spec.a * spec.lam],
                       limit=200)
    assert penalty_value(spec, t) == pytest.approx(integral, rel=1e-8, abs=1e-12)


def test_vectorized_penalty():
    t = np.array([0.5, 2.0, 4.0])
    np.testing.assert_allclose(penalty_deriv(SCAD, t), [1.0, 1.7 / 2.7, 0.0])


@pytest.mark.parametrize("kwargs", [
    dict(kind=Penalty.SCAD, a=2.0),
    dict(kind=Penalty.SCAD, lam=-1.0),
    dict(kind=Penalty.MCP, a=0.0),
    dict(kind=Penalty.L1, lam=float("nan")),
    dict(kind=Penalty.ADAPTIVE_L1),
    dict(kind=Penalty.ADAPTIVE_L1, base_beta=np.ones(2), gamma=-1.0),
])
def test_penalty_spec_validation(kwargs):
    with pytest.raises(BadSpec):
        PenaltySpec(**kwargs)


def test_negative_argument_rejected():
    with pytest.raises(BadSpec):
        penalty_deriv(SCAD, -0.1)


def test_solver_config_validation():
    with pytest.raises(BadSpec):
        SolverConfig(lambda_grid=(0.1, 0.5))
    with pytest.raises(BadSpec):
        SolverConfig(lambda_grid=())
    with pytest.raises(BadSpec):
        SolverConfig(tol=0.0)


# weighted-L1 coordinate descent ------------------------------------------------


def test_zero_weights_give_ols(rng):
    Z = rng.standard_normal((40, 5))
    y = rng.standard_normal(40)
    est = weighted_lasso_cd(Z, y, np.zeros(5), TIGHT)
    np.testing.assert_allclose(est.beta, normal_equations(Z, y), atol=1e-8)


def test_large_weights_give_zero(rng):
    Z = rng.standard_normal((40, 5))
    y = rng.standard_normal(40)
    est = weighted_lasso_cd(Z, y, np.full(5, lambda_max(Z, y) * 1.0001))
    assert np.all(est.beta == 0.0)


def test_orthonormal_soft_threshold(rng):
    Z = orthonormal_design(50, 8, rng)
    y = rng.standard_normal(50) * 3
    w = np.linspace(0.0, 1.0, 8)
    est = weighted_lasso_cd(Z, y, w, TIGHT)
    z = Z.T @ y / 50
    expected = [soft_oracle(z[j], w[j]) for j in range(8)]
    np.testing.assert_allclose(est.beta, expected, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(5, 40), d=st.integers(1, 30))
def test_kkt_holds(seed, n, d):
    g = np.random.default_rng(seed)
    Z = g.standard_normal((n, d))
    y = g.standard_normal(n)
    w = g.uniform(0.0, 1.0, d) * lambda_max(Z, y)
    est = weighted_lasso_cd(Z, y, w, SolverConfig(tol=1e-10, max_inner=200_000))
    assert kkt_violation(Z, y, est.beta, w) <= 1e-6 * (1 + np.abs(y).max())


def test_infinite_weight_pins_coordinate(rng):
    Z = rng.standard_normal((30, 3))
    y = Z @ np.array([3.0, 1.0, 0.0])
    w = np.array([np.inf, 0.0, 0.0])
    est = weighted_lasso_cd(Z, y, w, TIGHT)
    assert est.beta[0] == 0.0
    np.testing.assert_allclose(est.beta[1:], normal_equations(Z[:, 1:], y), atol=1e-8)


def test_sweep_cap_warns(rng):
    Z = rng.standard_normal((30, 10))
    Z[:, 1] = Z[:, 0] + 0.01 * Z[:, 1]
    y = rng.standard_normal(30)
    with pytest.warns(ConvergenceWarning):
        est = weighted_lasso_cd(Z, y, np.full(10, 1e-3), SolverConfig(max_inner=1))
    assert not est.converged


def test_weight_validation(rng):
    Z = rng.standard_normal((10, 3))
    with pytest.raises(BadSpec):
        weighted_lasso_cd(Z, np.zeros(10), np.array([1.0, -1.0, 0.0]))
    with pytest.raises(BadSpec):
        weighted_lasso_cd(Z, np.zeros(10), np.ones(2))


# LLA ----------------------------------------------------------------------------


def test_l1_lla_is_single_weighted_fit(rng):
    Z = rng.standard_normal((30, 6))
    y = rng.standard_normal(30)
    spec = PenaltySpec(Penalty.L1, lam=0.1)
    est = lla_fit(Z, y, spec, TIGHT)
    assert est.iterations == 1
    ref = weighted_lasso_cd(Z, y, np.full(6, 0.1), TIGHT)
    np.testing.assert_allclose(est.beta, ref.beta, atol=1e-10)


def test_scad_first_step_from_zero_is_lasso(rng):
    Z = rng.standard_normal((30, 6))
    y = Z[:, 0] * 2 + rng.standard_normal(30)
    one = lla_fit(Z, y, SCAD.with_lambda(0.2), TIGHT, max_outer=1)
    lasso = weighted_lasso_cd(Z, y, np.full(6, 0.2), TIGHT)
    np.testing.assert_allclose(one.beta, lasso.beta, atol=1e-10)


@pytest.mark.parametrize("z", [-6.0, -2.5, -1.5, -0.4, 0.0, 0.8, 1.2, 2.0, 3.0, 5.0])
def test_scad_orthonormal_matches_grid(z):
    rng = np.random.default_rng(7)
    n = 40
    Z = orthonormal_design(n, 1, rng)
    y = Z[:, 0] * z
    est = lla_fit(Z, y, SCAD, TIGHT)
    best, step = scad_1d_grid(z, 1.0, 3.7)
    assert abs(est.beta[0] - best) <= step + 1e-9


def test_scad_unbiased_for_large_signal(rng):
    Z = orthonormal_design(60, 4, rng)
    beta = np.array([10.0, -8.0, 0.0, 0.0])
    y = Z @ beta
    est = lla_fit(Z, y, SCAD, TIGHT)
    np.testing.assert_allclose(est.beta, beta, atol=1e-8)


def test_lla_objective_non_increasing(rng):
    Z = rng.standard_normal((50, 20))
    y = Z[:, :3] @ np.array([2.0, -1.5, 1.0]) + rng.standard_normal(50)
    trace = []
    lla_fit(Z, y, SCAD.with_lambda(0.15), TIGHT, trace=trace)
    assert len(trace) >= 2
    assert all(b <= a + 1e-10 for a, b in zip(trace, trace[1:]))


def test_lla_init_rule(rng):
    Z = rng.standard_normal((200, 37))
    y = rng.standard_normal(200)
    np.testing.assert_allclose(lla_init(Z, y), normal_equations(Z, y), atol=1e-8)
    assert np.all(lla_init(rng.standard_normal((200, 38)), y) == 0.0)


# lambda path and BIC --------------------------------------------------------------


def test_default_grid(rng):
    Z = rng.standard_normal((30, 5))
    y = rng.standard_normal(30)
    grid = default_lambda_grid(Z, y)
    assert grid.size == 50
    assert grid[0] == pytest.approx(lambda_max(Z, y))
    assert grid[-1] == pytest.approx(1e-3 * grid[0])
    assert np.all(np.diff(grid) < 0)


def test_bic_pure_noise_picks_empty_model(rng):
    Z = rng.standard_normal((200, 10))
    y = rng.standard_normal(200) * 0.01
    _, est = bic_select(Z, y, SCAD)
    assert est.size <= 1


def test_bic_single_strong_predictor(rng):
    Z = rng.standard_normal((200, 10))
    y = 5 * Z[:, 0] + rng.standard_normal(200)
    _, est = bic_select(Z, y, SCAD)
    assert est.support.tolist() == [0]


def test_bic_single_grid_point(rng):
    Z = rng.standard_normal((40, 4))
    y = rng.standard_normal(40)
    lam, est = bic_select(Z, y, SCAD, SolverConfig(lambda_grid=(0.05,)))
    assert lam == 0.05
    ref = lla_fit(Z, y, SCAD.with_lambda(0.05), init=lla_init(Z, y))
    np.testing.assert_allclose(est.beta, ref.beta, atol=1e-6)


@pytest.mark.parametrize("kind", [Penalty.SCAD, Penalty.MCP, Penalty.L1])
def test_path_matches_warm_started_fits(rng, kind):
    Z = rng.standard_normal((40, 12))
    y = Z[:, :2] @ np.array([1.5, -1.0]) + rng.standard_normal(40)
    fam = PenaltySpec(kind, a=3.7 if kind is not Penalty.MCP else 3.0)
    cfg = SolverConfig(n_lambda=12, tol=1e-10, max_inner=100_000, max_outer=100)
    path = fit_path(Z, y, fam, cfg, init=np.zeros(12))
    warm = np.zeros(12)
    for pf in path:
        est = lla_fit(Z, y, fam.with_lambda(pf.lam), cfg, warm_start=warm)
        np.testing.assert_allclose(pf.estimate.beta, est.beta, atol=1e-7)
        cold = lla_fit(Z, y, fam.with_lambda(pf.lam), cfg)
        np.testing.assert_allclose(pf.estimate.beta, cold.beta, atol=1e-5)
        warm = est.beta


# adaptive Lasso ------------------------------------------------------------------


def test_adaptive_gamma_zero_is_lasso(rng):
    Z = rng.standard_normal((30, 6))
    y = rng.standard_normal(30)
    base = np.array([1.0, 0.0, 2.0, 0.5, 0.0, 3.0])
    est = adaptive_lasso_fit(Z, y, 0.1, 0.0, base, TIGHT)
    ref = weighted_lasso_cd(Z, y, np.full(6, 0.1), TIGHT)
    np.testing.assert_allclose(est.beta, ref.beta, atol=1e-10)


def test_adaptive_pins_zero_base(rng):
    Z = rng.standard_normal((30, 4))
    y = Z @ np.array([1.0, 2.0, 3.0, 4.0])
    est = adaptive_lasso_fit(Z, y, 0.01, 1.0, np.array([1.0, 0.0, 1.0, 0.0]), TIGHT)
    assert est.beta[1] == 0.0 and est.beta[3] == 0.0


def test_adaptive_matches_explicit_weights(rng):
    Z = rng.standard_normal((30, 5))
    y = rng.standard_normal(30)
    base = np.array([0.5, -2.0, 1.0, 0.1, 4.0])
    est = adaptive_lasso_fit(Z, y, 0.2, 2.0, base, TIGHT)
    ref = weighted_lasso_cd(Z, y, 0.2 / base**2, TIGHT)
    np.testing.assert_allclose(est.beta, ref.beta, atol=1e-10)
    fam = PenaltySpec(Penalty.ADAPTIVE_L1, gamma=2.0, base_beta=base)
    on_path = fit_path(Z, y, fam, SolverConfig(lambda_grid=(0.5, 0.2), tol=1e-12,
                                                max_inner=100_000))[1]
    np.testing.assert_allclose(on_path.estimate.beta, ref.beta, atol=1e-8)


def test_adaptive_length_check(rng):
    with pytest.raises(BadSpec):
        adaptive_lasso_fit(rng.standard_normal((10, 3)), np.zeros(10), 0.1, 1.0, np.ones(2))
