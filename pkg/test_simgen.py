import numpy as np
import pytest
import scipy.linalg
from pydantic import ValidationError

from src.core.errors import CorrelationError
from src.core.simgen import (BUILTINS, CORRELATIONS, ErrorLaw, ResponseSpec, ScenarioSpec, builtin_scenario,
                             correlate_errors, equicorrelation, generate, sample)


def _two_normals(rho: float) -> ScenarioSpec:
    return ScenarioSpec(
        name="pair",
        covariates=[{"family": "uniform", "low": 0.0, "high": 1.0}],
        responses=[ResponseSpec(mean={}), ResponseSpec(mean={})],
        correlation=equicorrelation(2, rho),
        sizes={"n_tr": 10, "n_cal1": 5, "n_cal2": 5},
    )


def test_identity_correlation_leaves_errors_unchanged():
    eps = np.random.default_rng(0).standard_normal((50, 3))
    assert np.array_equal(correlate_errors(eps, np.eye(3)), eps)


def test_cholesky_factor_reproduces_matrices():
    for name, r in CORRELATIONS.items():
        u = scipy.linalg.cholesky(np.asarray(r), lower=False)
        assert np.allclose(u.T @ u, r, atol=1e-12), name


def test_not_positive_definite():
    bad = [[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]]
    with pytest.raises(CorrelationError):
        correlate_errors(np.ones((4, 3)), bad)


def test_normal_errors_reach_target_correlation():
    print("=== Testing error correlation ===")
    data = sample(_two_normals(0.8), 100_000, np.random.default_rng(1))
    assert np.corrcoef(data.y.T)[0, 1] == pytest.approx(0.8, abs=0.01)


def test_gamma_errors_reach_target_correlation():
    spec = builtin_scenario("balance-gamma3", correlation="R2")
    data = sample(spec, 100_000, np.random.default_rng(2))
    resid = data.y - data.x[:, [0]]
    c = np.corrcoef(resid.T)
    assert c[0, 1] == pytest.approx(0.8, abs=0.02)
    assert c[1, 2] == pytest.approx(0.8, abs=0.02)


def test_setup_one_marginal_structure():
    print("=== Testing setup1 structure ===")
    spec = builtin_scenario("setup1")
    data = sample(spec, 100_000, np.random.default_rng(3))
    x1, x2 = data.x[:, 0], data.x[:, 1]
    assert x1.mean() == pytest.approx(5.0, abs=0.1)
    assert x2.min() >= -5 and x2.max() <= 5
    # first correlated column is the untouched gamma(2, rate 0.2) draw
    assert np.mean(data.y[:, 0] - (5 + 2 * x1)) == pytest.approx(10.0, abs=0.1)
    u = scipy.linalg.cholesky(np.asarray(CORRELATIONS["R1"]), lower=False)
    slope = np.polyfit(x2, data.y[:, 2] - x2 ** 2, 1)[0]
    assert slope == pytest.approx(5 * u[2, 2], abs=0.05)


def test_ten_dimension_covariate_bounds():
    data = sample(builtin_scenario("tendim"), 5000, np.random.default_rng(4))
    x = data.x
    assert data.p == 10 and data.d == 5
    assert np.all(x[:, 1] <= x[:, 4]) and np.all(x[:, 4] <= x[:, 3])


def test_generate_is_deterministic_per_replicate():
    spec = builtin_scenario("setup3", seed=9, n_test=40)
    a_data, a_test = generate(spec, replicate=2)
    b_data, b_test = generate(spec, replicate=2)
    c_data, _ = generate(spec, replicate=3)
    assert np.array_equal(a_data.y, b_data.y) and np.array_equal(a_test.x, b_test.x)
    assert not np.array_equal(a_data.y, c_data.y)
    assert a_data.n == 1000 and a_test.n == 40
    assert not np.array_equal(a_data.x[:40], a_test.x)
    d_data, _ = generate(spec, replicate=2, seed=10)
    assert not np.array_equal(a_data.y, d_data.y)


def test_every_builtin_builds_and_samples():
    for name in BUILTINS:
        spec = builtin_scenario(name)
        data = sample(spec, 200, np.random.default_rng(0))
        assert np.all(np.isfinite(data.y)), name
        assert spec.feature_map().expand(data.x).shape == (200, spec.feature_map().m)
        assert ScenarioSpec.from_dict(spec.to_dict()) == spec
    for name in ("balance-normal3", "balance-gamma3"):
        spec = builtin_scenario(name, heteroskedastic=True)
        assert np.all(np.isfinite(sample(spec, 500, np.random.default_rng(1)).y))
    assert builtin_scenario("setup1", correlation="R4").correlation == CORRELATIONS["R4"]
    assert builtin_scenario("balance-gamma3").sizes.as_tuple() == (2000, 100, 100)


def test_builtin_overrides_and_unknown_names():
    spec = builtin_scenario("setup2", seed=17, n_test=33)
    assert spec.seed == 17 and spec.n_test == 33
    with pytest.raises(ValueError):
        builtin_scenario("setup9")
    with pytest.raises(ValueError):
        builtin_scenario("setup1", correlation="R7")


def test_scenario_validation():
    base = _two_normals(0.5).to_dict()
    with pytest.raises(ValidationError):
        ScenarioSpec.model_validate({**base, 'correlation': [[1.0, 0.5], [0.4, 1.0]]})
    with pytest.raises(ValidationError):
        ScenarioSpec.model_validate({**base, 'correlation': [[1.0]]})
    with pytest.raises(ValidationError):
        ScenarioSpec.model_validate({**base, 'feature_terms': ["1", "x3"]})
    with pytest.raises(ValidationError):
        ScenarioSpec.model_validate({**base, 'covariates': [{"family": "uniform", "low": "x1", "high": 1.0}]})
    with pytest.raises(ValidationError):
        ErrorLaw(family="normal", sd=0.0)


if __name__ == "__main__":
    test_identity_correlation_leaves_errors_unchanged()
    test_cholesky_factor_reproduces_matrices()
    test_not_positive_definite()
    test_normal_errors_reach_target_correlation()
    test_gamma_errors_reach_target_correlation()
    test_setup_one_marginal_structure()
    test_ten_dimension_covariate_bounds()
    test_generate_is_deterministic_per_replicate()
    test_every_builtin_builds_and_samples()
    test_builtin_overrides_and_unknown_names()
    test_scenario_validation()
    print("simgen tests passed")
