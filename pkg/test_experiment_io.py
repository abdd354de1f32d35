import json
import os
import tempfile

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.errors import DataFormatError
from src.core.features import FeatureMap
from src.core.runner import fit_method, run_replicated
from src.core.simgen import builtin_scenario
from src.core.splitting import make_split
from src.data.csv_io import load_covariates, load_dataset, parse_targets, predictions_frame
from src.data.experiment import ExperimentConfig, MethodConfig, ScenarioChoice, dump_experiment, load_experiment
from src.data.model_store import FittedModel, load_model, model_from_dict, save_model
from src.data.reports import read_aggregate, write_run
from src.data.schemas import MultiTargetDataset


def _write(folder: str, name: str, text: str) -> str:
    path = os.path.join(folder, name)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
    return path


def _fitted(method: str = "cqhr") -> FittedModel:
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 2, size=(300, 2))
    y = np.column_stack([x[:, 0] + rng.standard_normal(300), x[:, 1] - x[:, 0] + rng.standard_normal(300)])
    data = MultiTargetDataset(x, y)
    config = MethodConfig(method=method)
    fm = FeatureMap.from_terms("custom", ["x1", "x2", "x1*x2"])
    plan = make_split(300, (0.5, 0.25, 0.25), seed=4)
    predictor = fit_method(config, data, plan, fm)
    return FittedModel(predictor, config, ["a", "b"], ["u", "v"], fm, 4, plan.sizes)


def test_experiment_round_trip_json_and_toml():
    print("=== Testing experiment files ===")
    config = ExperimentConfig(scenario=ScenarioChoice(builtin="balance-gamma3", correlation="R3",
                                                      heteroskedastic=True),
                              method=MethodConfig(method="chr-signed", alpha=0.2, reference_dim="min-variability"),
                              replicates=12, n_test=30, seed=99, jobs=2)
    with tempfile.TemporaryDirectory() as folder:
        for name in ("exp.json", "exp.toml"):
            path = os.path.join(folder, name)
            dump_experiment(config, path)
            assert load_experiment(path) == config
    spec = config.scenario_spec()
    assert spec.seed == 99 and spec.n_test == 30 and spec.correlation[0][1] == 0.6


def test_experiment_with_inline_scenario():
    spec = builtin_scenario("setup4")
    config = ExperimentConfig(scenario=ScenarioChoice(spec=spec), n_test=7, seed=3)
    with tempfile.TemporaryDirectory() as folder:
        path = os.path.join(folder, "inline.json")
        dump_experiment(config, path)
        loaded = load_experiment(path)
    resolved = loaded.scenario_spec()
    assert resolved.n_test == 7 and resolved.seed == 3
    assert resolved.feature_terms == spec.feature_terms


def test_experiment_errors():
    with pytest.raises(ValidationError):
        ScenarioChoice()
    with pytest.raises(ValidationError):
        ScenarioChoice(builtin="setup1", spec=builtin_scenario("setup1"))
    with pytest.raises(ValidationError):
        MethodConfig(method="nope")
    with pytest.raises(ValidationError):
        MethodConfig(lo_level=0.9, hi_level=0.1)
    with tempfile.TemporaryDirectory() as folder:
        with pytest.raises(DataFormatError):
            load_experiment(_write(folder, "v2.json", json.dumps({'schema_version': 2,
                                                                  'scenario': {'builtin': 'setup1'}})))
        with pytest.raises(DataFormatError):
            load_experiment(_write(folder, "broken.toml", "scenario = [\n"))
        with pytest.raises(DataFormatError):
            load_experiment(os.path.join(folder, "absent.json"))


def test_model_file_round_trip():
    print("=== Testing model files ===")
    x = np.random.default_rng(1).uniform(0, 2, size=(20, 2))
    for method in ("chr-abs", "chr-signed", "cqhr", "absmax", "bonf-cqr", "bonf-naive"):
        fitted = _fitted(method)
        with tempfile.TemporaryDirectory() as folder:
            path = os.path.join(folder, "model.json")
            save_model(path, fitted)
            loaded = load_model(path)
        lo, hi = fitted.predictor.predict_many(x)
        lo2, hi2 = loaded.predictor.predict_many(x)
        assert np.array_equal(lo, lo2) and np.array_equal(hi, hi2), method
        assert loaded.targets == ["a", "b"] and loaded.covariates == ["u", "v"]
        assert loaded.feature_map == fitted.feature_map
        assert loaded.config == fitted.config


def test_model_file_mismatches():
    good = json.loads(json.dumps(_fitted().to_dict()))
    model_from_dict(good)
    broken = [
        {**good, 'schema_version': 2},
        {**good, 'method': 'absmax'},
        {**good, 'targets': ['a']},
        {**good, 'covariates': ['u', 'v', 'w']},
        {**good, 'feature_map': FeatureMap.linear(2).to_dict()},
        {**good, 'predictor': {**good['predictor'], 'kind': 'mystery'}},
        {k: v for k, v in good.items() if k != 'seed'},
    ]
    for raw in broken:
        with pytest.raises(DataFormatError):
            model_from_dict(raw)


def test_csv_loading_and_errors():
    print("=== Testing CSV input ===")
    with tempfile.TemporaryDirectory() as folder:
        ok = _write(folder, "ok.csv", "x1,y1,x2,y2\n1,2,3,4\n5,6,7,8\n")
        data, covariates = load_dataset(ok, ["y1", "y2"])
        assert covariates == ["x1", "x2"]
        assert data.y.tolist() == [[2.0, 4.0], [6.0, 8.0]]
        assert load_covariates(ok, ["x2", "x1"]).tolist() == [[3.0, 1.0], [7.0, 5.0]]

        gap = _write(folder, "gap.csv", "x1,y1\n1,2\n3,4\n5,\n")
        with pytest.raises(DataFormatError, match=r"row 3, column 'y1': missing value"):
            load_dataset(gap, ["y1"])
        word = _write(folder, "word.csv", "x1,y1\n1,2\nabc,4\n")
        with pytest.raises(DataFormatError, match=r"row 2, column 'x1': non-numeric value 'abc'"):
            load_dataset(word, ["y1"])
        with pytest.raises(DataFormatError, match="not found"):
            load_dataset(ok, ["y3"])
        with pytest.raises(DataFormatError):
            load_dataset(_write(folder, "empty.csv", ""), ["y1"])
    with pytest.raises(DataFormatError):
        parse_targets("a,a")
    assert parse_targets(" a , b ") == ["a", "b"]


def test_prediction_columns():
    frame = predictions_frame(np.array([[0.0, 1.0]]), np.array([[2.0, 3.0]]), ["p", "q"])
    assert list(frame.columns) == ["p_lo", "p_hi", "q_lo", "q_hi"]


def test_run_outputs_are_byte_identical():
    spec = builtin_scenario("setup4", n_test=20)
    meta = {'method': 'absmax', 'scenario': spec.name, 'replicates': 2, 'n_test': 20, 'seed': 1, 'alpha': 0.1}
    contents = []
    with tempfile.TemporaryDirectory() as folder:
        for attempt in range(2):
            report, table = run_replicated(spec, MethodConfig(method="absmax"), 2, seed=1)
            out = os.path.join(folder, f"run{attempt}")
            csv_path, json_path = write_run(out, report, table, meta)
            with open(csv_path, 'rb') as f1, open(json_path, 'rb') as f2:
                contents.append((f1.read(), f2.read()))
        doc = read_aggregate(json_path)
    assert contents[0] == contents[1]
    assert doc['method'] == 'absmax' and doc['n_test'] == 20 and doc['total_test_points'] == 40
    assert 0.0 <= doc['overall_coverage'] <= 1.0


if __name__ == "__main__":
    test_experiment_round_trip_json_and_toml()
    test_experiment_with_inline_scenario()
    test_experiment_errors()
    test_model_file_round_trip()
    test_model_file_mismatches()
    test_csv_loading_and_errors()
    test_prediction_columns()
    test_run_outputs_are_byte_identical()
    print("experiment and file tests passed")
