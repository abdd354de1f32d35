import math

import numpy as np
import pytest
from scipy.stats import norm

from src.core.baselines import (AbsoluteMaxPredictor, MarginalQuantilePredictor, bonferroni_levels,
                                calibrate_absolute_max, calibrate_bonferroni_cqr, fit_absolute_max,
                                fit_bonferroni_cqr, fit_naive_bonferroni, naive_bonferroni)
from src.core.errors import SplitTooSmallError
from src.core.features import FeatureMap
from src.core.metrics import evaluate
from src.core.models import PointModel, QuantileModel
from src.core.runner import run_replicated
from src.core.simgen import CORRELATIONS, builtin_scenario, correlate_errors, generate
from src.core.splitting import make_split_sizes
from src.data.experiment import MethodConfig
from src.data.schemas import MiscoverageConfig, MultiTargetDataset


def _cal(y) -> MultiTargetDataset:
    y = np.asarray(y, dtype=float)
    return MultiTargetDataset(np.zeros((y.shape[0], 1)), y)


def _unit_band(p: int) -> QuantileModel:
    return QuantileModel(np.tile([-1.0, 0.0], (p, 1)), np.tile([1.0, 0.0], (p, 1)), 0.05, 0.95,
                         FeatureMap.linear(1), d=1)


def test_bonferroni_levels():
    lo, hi = bonferroni_levels(0.1, 3)
    assert lo == pytest.approx(0.1 / 6)
    assert hi == pytest.approx(1 - 0.1 / 6)
    assert bonferroni_levels(0.2, 1) == pytest.approx((0.1, 0.9))


def test_absolute_max_hand_instance():
    print("=== Testing absolute-max hypercube ===")
    model = PointModel(np.zeros((2, 2)), FeatureMap.linear(1), d=1)
    cal = _cal([[1.0, -3.0], [2.0, 0.5], [-0.5, 0.2]])
    # max |r| per row = {3, 2, 0.5}; k = ceil(0.75 * 4) = 3
    pred = calibrate_absolute_max(model, cal, MiscoverageConfig(0.25))
    assert pred.halfwidth == 3.0
    rect = pred.predict([4.0])
    assert rect.lo.tolist() == [-3.0, -3.0]
    assert rect.hi.tolist() == [3.0, 3.0]
    again = AbsoluteMaxPredictor.from_dict(pred.to_dict())
    assert again.halfwidth == 3.0 and again.kind == "absmax"


def test_bonferroni_cqr_hand_instance():
    print("=== Testing Bonferroni CQR ===")
    cal = _cal([[0.0, 0.5], [2.0, 0.0], [-3.0, 1.5]])
    # level 1 - 0.5 / 2 = 0.75 over 3 rows: k = 3, the column maximum
    pred = calibrate_bonferroni_cqr(_unit_band(2), cal, MiscoverageConfig(0.5))
    assert pred.adjustments.tolist() == [2.0, 0.5]
    rect = pred.predict([1.0])
    assert rect.lo.tolist() == [-3.0, -1.5]
    assert rect.hi.tolist() == [3.0, 1.5]
    again = MarginalQuantilePredictor.from_dict(pred.to_dict())
    assert again.kind == "bonf-cqr"
    assert np.array_equal(again.adjustments, pred.adjustments)


def test_naive_bonferroni_is_raw_band():
    model = _unit_band(3)
    pred = naive_bonferroni(model, MiscoverageConfig(0.1))
    assert pred.kind == "bonf-naive"
    x = np.array([[0.0], [2.0]])
    lo, hi = pred.predict_many(x)
    band = model.predict(x)
    assert np.array_equal(lo, band.lo) and np.array_equal(hi, band.hi)


def test_fitted_baselines_on_scenario():
    spec = builtin_scenario("setup1", n_test=2000)
    data, test = generate(spec, replicate=3)
    fm = spec.feature_map()
    config = MiscoverageConfig(0.1)
    split = make_split_sizes(data.n, (500, 500, 0), seed=3, required=(True, True, False))

    absmax = fit_absolute_max(data, split, config, fm)
    report = evaluate(absmax, test)
    assert 0.85 <= report.overall_coverage <= 0.95
    assert len(set(np.round(report.mean_lengths, 9))) == 1

    bonf = fit_bonferroni_cqr(data, split, config, fm)
    assert bonf.quantile_model.lo_level == pytest.approx(0.1 / 6)
    report = evaluate(bonf, test)
    assert report.overall_coverage >= 0.85
    assert min(report.marginal_coverage) >= 0.94

    naive = fit_naive_bonferroni(data, make_split_sizes(data.n, (1000, 0, 0), seed=3, required=(True, False, False)),
                                 config, fm)
    assert np.all(naive.adjustments == 0)


def test_naive_bonferroni_with_true_quantiles_covers():
    print("=== Testing the Bonferroni union bound ===")
    alpha, p, n = 0.1, 3, 20_000
    lo_level, hi_level = bonferroni_levels(alpha, p)
    intercepts, slopes, scales = np.array([1.0, -2.0, 0.5]), np.array([2.0, 0.0, -1.0]), np.array([1.0, 3.0, 0.5])
    model = QuantileModel(np.column_stack([intercepts + scales * norm.ppf(lo_level), slopes]),
                          np.column_stack([intercepts + scales * norm.ppf(hi_level), slopes]),
                          lo_level, hi_level, FeatureMap.linear(1), d=1)
    rng = np.random.default_rng(9)
    x = rng.uniform(0, 2, size=(n, 1))
    eps = correlate_errors(rng.standard_normal((n, p)), CORRELATIONS["R2"])
    y = intercepts + x * slopes + eps * scales
    report = evaluate(naive_bonferroni(model, MiscoverageConfig(alpha)), MultiTargetDataset(x, y))
    se = math.sqrt(alpha * (1 - alpha) / n)
    assert report.overall_coverage >= 1 - alpha - 3 * se
    assert np.allclose(report.marginal_coverage, 1 - alpha / p, atol=0.01)


def test_bonferroni_cqr_covers_at_least_as_much_as_cqhr():
    spec = builtin_scenario("setup1")
    cqhr, _ = run_replicated(spec, MethodConfig(method="cqhr"), 3, n_test=500, seed=21)
    bonf, _ = run_replicated(spec, MethodConfig(method="bonf-cqr"), 3, n_test=500, seed=21)
    se = math.sqrt(0.09 / cqhr.n_test)
    assert bonf.overall_coverage >= cqhr.overall_coverage - 3 * se
    assert np.all(np.array(bonf.mean_lengths) > 0)


def test_baselines_reject_empty_parts():
    data = _cal(np.ones((10, 2)))
    train_only = make_split_sizes(10, (10, 0, 0), seed=0, required=(True, False, False))
    with pytest.raises(SplitTooSmallError):
        fit_absolute_max(data, train_only, MiscoverageConfig(0.1))
    with pytest.raises(SplitTooSmallError):
        fit_bonferroni_cqr(data, train_only, MiscoverageConfig(0.1))


if __name__ == "__main__":
    test_bonferroni_levels()
    test_absolute_max_hand_instance()
    test_bonferroni_cqr_hand_instance()
    test_naive_bonferroni_is_raw_band()
    test_fitted_baselines_on_scenario()
    test_naive_bonferroni_with_true_quantiles_covers()
    test_bonferroni_cqr_covers_at_least_as_much_as_cqhr()
    test_baselines_reject_empty_parts()
    print("baseline tests passed")
