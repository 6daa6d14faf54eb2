import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import normal_equations, orthonormal_design, rank_desc_abs, two_sample_t
from sisselect.core import Dataset, ModelEstimate, standardize
from sisselect.exceptions import BadSize, BadSpec, OneClassOnly, SingularSystem
from sisselect.screening import (RIDGE_INF, IsisConfig, ItrrsConfig, classif_screen,
                                 isis_select, itrrs_screen, itrrs_step, rank_by_magnitude,
                                 ridge_omega, sis_rank, sis_scad_selector, sis_screen)


def _sd(X, y):
    return standardize(Dataset(y=np.asarray(y, float), X=np.asarray(X, float)))


def test_sis_orthonormal_dominance(rng):
    Z = orthonormal_design(20, 3, rng)
    res = sis_rank(_sd(Z, Z @ np.array([5.0, 0.0, 0.0])))
    assert res.ranking[0] == 0


def test_sis_omega_matches_dot_products(rng):
    sd = _sd(rng.standard_normal((6, 4)), rng.standard_normal(6))
    omega = sis_rank(sd).omega
    for j in range(4):
        assert omega[j] == pytest.approx(sum(sd.Z[i, j] * sd.y_centered[i] for i in range(6)))


def test_sis_ranking_scale_invariant(rng):
    X = rng.standard_normal((15, 9))
    y = rng.standard_normal(15)
    a, b = sis_rank(_sd(X, y)), sis_rank(_sd(X, 2 * y))
    np.testing.assert_array_equal(a.ranking, b.ranking)
    np.testing.assert_allclose(b.omega, 2 * a.omega)


def test_ties_by_index_and_constant_last():
    order = rank_by_magnitude(np.array([1.0, -3.0, 3.0, 0.0, 1.0]),
                              constant=np.array([False, False, False, True, False]))
    assert order.tolist() == [1, 2, 0, 4, 3]
    # a constant column loses even against a zero statistic
    order = rank_by_magnitude(np.array([5.0, 0.0]), constant=np.array([True, False]))
    assert order.tolist() == [1, 0]


def test_sis_screen_sizes(rng):
    sd = _sd(rng.standard_normal((200, 300)), rng.standard_normal(200))
    assert sis_screen(sd, 37).selected.size == 37
    assert sis_screen(sd, 300).selected.tolist() == list(range(300))
    with pytest.raises(BadSize):
        sis_screen(sd, 301)
    with pytest.raises(BadSize):
        sis_screen(sd, 0)


def test_sis_noiseless_single_signal(rng):
    X = rng.standard_normal((100, 50))
    sd = _sd(X, 5 * X[:, 0])
    omega = np.abs(sis_rank(sd).omega)
    assert omega[0] > omega[1:].max()
    assert sis_screen(sd, 1).selected.tolist() == [0]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), d1=st.integers(1, 20), d2=st.integers(1, 20))
def test_sis_nesting(seed, d1, d2):
    g = np.random.default_rng(seed)
    sd = _sd(g.standard_normal((12, 20)), g.standard_normal(12))
    lo, hi = sorted((d1, d2))
    assert set(sis_screen(sd, lo).selected) <= set(sis_screen(sd, hi).selected)


def test_sis_matches_stable_sort_oracle(rng):
    sd = _sd(rng.standard_normal((10, 30)), rng.standard_normal(10))
    omega = sd.Z.T @ sd.y_centered
    np.testing.assert_array_equal(sis_rank(sd).ranking, rank_desc_abs(omega))


# ridge screening ---------------------------------------------------------------


def test_itrrs_inf_equals_sis(rng):
    sd = _sd(rng.standard_normal((20, 50)), rng.standard_normal(20))
    step = itrrs_step(sd, RIDGE_INF, 0.4)
    assert step.d == 20
    np.testing.assert_array_equal(step.selected, sis_screen(sd, 20).selected)


def test_itrrs_huge_lambda_matches_inf(rng):
    sd = _sd(rng.standard_normal((20, 50)), rng.standard_normal(20))
    np.testing.assert_array_equal(itrrs_step(sd, 1e12, 0.5).ranking,
                                  itrrs_step(sd, RIDGE_INF, 0.5).ranking)


def test_itrrs_tiny_lambda_is_ols(rng):
    sd = _sd(rng.standard_normal((30, 3)), rng.standard_normal(30))
    omega = ridge_omega(sd.Z, sd.y_centered, 1e-12)
    np.testing.assert_allclose(omega, normal_equations(sd.Z, sd.y_centered), atol=1e-6)


def test_ridge_dual_form_matches_primal(rng):
    Z = rng.standard_normal((8, 20))
    y = rng.standard_normal(8)
    primal = np.linalg.solve(Z.T @ Z + 0.7 * np.eye(20), Z.T @ y)
    np.testing.assert_allclose(ridge_omega(Z, y, 0.7), primal, rtol=1e-9, atol=1e-12)


def test_itrrs_zero_lambda_needs_p_below_n(rng):
    sd = _sd(rng.standard_normal((5, 10)), rng.standard_normal(5))
    with pytest.raises(SingularSystem):
        itrrs_step(sd, 0.0, 0.5)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(5, 25), p=st.integers(4, 60))
def test_itrrs_large_lambda_property(seed, n, p):
    g = np.random.default_rng(seed)
    sd = _sd(g.standard_normal((n, p)), g.standard_normal(n))
    lam = 1e10 * np.abs(sd.Z.T @ sd.Z).max()
    np.testing.assert_array_equal(itrrs_step(sd, lam, 0.5).ranking, sis_rank(sd).ranking)


def test_itrrs_schedule_example(rng):
    sd = _sd(rng.standard_normal((100, 1000)), rng.standard_normal(100))
    res = itrrs_screen(sd, ItrrsConfig(lam=RIDGE_INF, delta=0.5, d_final=50))
    assert [s.size for s in res.steps] == [500, 250, 125, 62, 31]
    assert res.selected.size == 31
    # at lambda = infinity the ranking never changes, so the end result is plain SIS
    np.testing.assert_array_equal(res.selected, sis_screen(sd, 31).selected)


def test_itrrs_single_step_equals_step(rng):
    sd = _sd(rng.standard_normal((40, 60)), rng.standard_normal(40))
    full = itrrs_screen(sd, ItrrsConfig(lam=2.0, delta=0.5, d_final=30))
    one = itrrs_step(sd, 2.0, 0.5)
    assert len(full.steps) == 1
    np.testing.assert_array_equal(full.selected, one.selected)


def test_itrrs_finite_lambda_ranking_is_permutation(rng):
    sd = _sd(rng.standard_normal((40, 200)), rng.standard_normal(40))
    res = itrrs_screen(sd, ItrrsConfig(lam=1.0, delta=0.5, d_final=20))
    assert sorted(res.ranking.tolist()) == list(range(200))
    assert set(res.ranking[: res.d]) == set(res.selected)
    for a, b in zip(res.steps, res.steps[1:]):
        assert set(b) <= set(a)


def test_itrrs_config_validation():
    with pytest.raises(BadSpec):
        ItrrsConfig(lam=1.0, delta=1.0, d_final=5)
    with pytest.raises(BadSpec):
        ItrrsConfig(lam=-1.0, delta=0.5, d_final=5)
    with pytest.raises(BadSpec):
        ItrrsConfig(lam=float("inf"), delta=0.5, d_final=5)


# ISIS -------------------------------------------------------------------------


def _recording(selector, seen):
    def wrapped(sub):
        seen.append(np.array(sub.y_centered))
        return selector(sub)
    return wrapped


def _check_orthogonality(sd, res, seen):
    n = sd.n
    chosen = []
    for group, resid in zip(res.groups, seen[1:]):
        chosen.extend(group.tolist())
        assert np.max(np.abs(sd.Z[:, chosen].T @ resid)) <= 1e-8 * n


def test_isis_noiseless_first_step_fit(rng):
    A = orthonormal_design(40, 30, rng)
    sd = _sd(A, A[:, 0])
    res = isis_select(sd, IsisConfig(d_total=20, inner_d=5))
    assert 0 in res.groups[0]
    assert res.residual_norms[0] <= 1e-8
    assert res.n_steps == 1


def _hidden_variable_instance(rng, n=60, p=40):
    F = rng.standard_normal(n)
    X = np.sqrt(0.5) * F[:, None] + np.sqrt(0.5) * rng.standard_normal((n, p))
    X[:, 3] = F
    Xc = X - X.mean(axis=0)
    S = Xc[:, 0] + Xc[:, 1] + Xc[:, 2]
    c = 5 * (Xc[:, 3] @ S) / (Xc[:, 3] @ Xc[:, 3])
    y = 5 * S - c * Xc[:, 3]
    return X, y


def test_isis_recovers_marginally_hidden_variable(rng):
    X, y = _hidden_variable_instance(rng)
    sd = _sd(X, y)
    assert abs(sis_rank(sd).omega[3]) <= 1e-9 * np.abs(sis_rank(sd).omega).max()
    assert sis_rank(sd).ranking[-1] == 3
    seen = []
    res = isis_select(sd, IsisConfig.for_n(60), _recording(sis_scad_selector(14), seen))
    assert {0, 1, 2, 3} <= set(res.selected.tolist())
    _check_orthogonality(sd, res, seen)


def test_isis_immediate_budget(rng):
    sd = _sd(rng.standard_normal((30, 50)), rng.standard_normal(30))
    res = isis_select(sd, IsisConfig(d_total=7, inner_d=3), lambda sub: np.arange(7))
    assert res.n_steps == 1
    assert res.selected.tolist() == list(range(7))


def test_isis_overflow_keeps_largest_coefficients(rng):
    sd = _sd(rng.standard_normal((30, 50)), rng.standard_normal(30))
    calls = []

    def selector(sub):
        calls.append(sub.p)
        beta = np.zeros(sub.p)
        if len(calls) == 1:
            beta[[0, 1, 2]] = [1.0, 1.0, 1.0]
        else:
            beta[[0, 1, 2, 3]] = [0.1, -5.0, 0.2, 3.0]
        return ModelEstimate(beta=beta)

    res = isis_select(sd, IsisConfig(d_total=5, inner_d=3), selector)
    assert res.groups[0].tolist() == [0, 1, 2]
    # second call sees columns 3..49; local 1 and 3 are global 4 and 6
    assert res.groups[1].tolist() == [4, 6]
    assert res.selected.size == 5


def test_isis_residual_orthogonality_random(rng):
    for _ in range(5):
        X = rng.standard_normal((50, 120))
        y = X[:, :4] @ np.array([3.0, -2.0, 2.0, 1.5]) + rng.standard_normal(50)
        sd = _sd(X, y)
        seen = []
        res = isis_select(sd, IsisConfig.for_n(50), _recording(sis_scad_selector(12), seen))
        assert res.selected.size <= 49
        _check_orthogonality(sd, res, seen)


def test_inner_selector_never_empty():
    g = np.random.default_rng(5)
    found = 0
    for _ in range(40):
        sd = _sd(g.standard_normal((20, 60)), g.standard_normal(20))
        beta = sis_scad_selector(6)(sd).beta
        assert np.count_nonzero(beta) >= 1
        if np.count_nonzero(beta) == 1:
            top = sis_rank(sd).ranking[0]
            assert beta[top] != 0
            found += 1
    # pure noise at n=20 should often send BIC to the empty model
    assert found > 0
    res = isis_select(sd, IsisConfig.for_n(20))
    assert res.selected.size == 19


def test_isis_without_projection_runs(rng):
    X, y = _hidden_variable_instance(rng)
    res = isis_select(_sd(X, y), IsisConfig.for_n(60), project=False)
    assert res.selected.size <= 59
    assert len(set(res.selected.tolist())) == res.selected.size


def test_isis_budget_must_be_below_n(rng):
    sd = _sd(rng.standard_normal((10, 20)), rng.standard_normal(10))
    with pytest.raises(BadSpec):
        isis_select(sd, IsisConfig(d_total=10, inner_d=3))


def test_isis_is_deterministic(rng):
    X, y = _hidden_variable_instance(rng)
    a = isis_select(_sd(X, y), IsisConfig.for_n(60))
    b = isis_select(_sd(X, y), IsisConfig.for_n(60))
    np.testing.assert_array_equal(a.selected, b.selected)


# two-class screening ----------------------------------------------------------------


def _labels(n1, n2):
    return np.concatenate([np.ones(n1), -np.ones(n2)])


def test_classif_separating_feature_first(rng):
    X = rng.standard_normal((20, 8))
    X[:10, 5] += 10.0
    res = classif_screen(_sd(X, _labels(10, 10)), 3)
    assert res.ranking[0] == 5


def test_classif_matches_t_statistic_ranking(rng):
    X = rng.standard_normal((20, 10))
    y = _labels(10, 10)
    res = classif_screen(_sd(X, y), 10)
    np.testing.assert_array_equal(res.ranking, rank_desc_abs(two_sample_t(X, y)))


def test_classif_label_flip(rng):
    X = rng.standard_normal((14, 6))
    y = _labels(7, 7)
    a, b = classif_screen(_sd(X, y), 3), classif_screen(_sd(X, -y), 3)
    np.testing.assert_allclose(b.omega, -a.omega)
    np.testing.assert_array_equal(a.ranking, b.ranking)


def test_classif_errors(rng):
    X = rng.standard_normal((6, 3))
    with pytest.raises(OneClassOnly):
        classif_screen(_sd(X, np.ones(6)), 2)
    with pytest.raises(BadSpec):
        classif_screen(_sd(X, np.arange(6.0)), 2)
