"""
Command line front end.

    python -m src.cli simulate --builtin setup1 --method cqhr --replicates 200 --ntest 500 --seed 42
    python -m src.cli simulate --config experiment.toml --jobs 4
    python -m src.cli fit --data train.csv --targets y1,y2 --method cqhr --model-out model.json
    python -m src.cli predict --model model.json --data new.csv --out predictions.csv
    python -m src.cli permute --data bp.csv --targets sys,dia --sizes 900,100,100 --permutations 200

Exit codes: 0 success, 1 data or numerical failure, 2 usage error.
"""
import logging
import math
import os
from enum import Enum
from typing import List, Optional, Tuple, Union

import coloredlogs
import typer
from pydantic import ValidationError

from .config import Config
from .core.errors import HyperrectError, ReplicateError
from .core.features import FeatureMap
from .core.regions import MIN_VARIABILITY
from .core.runner import fit_method, run_permutations, run_replicated
from .core.simgen import BUILTINS, CORRELATIONS
from .core.splitting import make_split
from .data.csv_io import load_covariates, load_dataset, parse_targets, write_predictions
from .data.experiment import METHODS, ExperimentConfig, MethodConfig, ScenarioChoice, load_experiment
from .data.model_store import FittedModel, load_model, save_model
from .data.reports import write_run

logger = logging.getLogger(__name__)

app = typer.Typer(add_completion=False, no_args_is_help=True,
                  help="Conformal hyperrectangular prediction regions for multi-target regression.")

Builtin = Enum("Builtin", {name.replace("-", "_"): name for name in BUILTINS}, type=str)
Method = Enum("Method", {name.replace("-", "_"): name for name in METHODS}, type=str)
Correlation = Enum("Correlation", {name: name for name in sorted(CORRELATIONS)}, type=str)


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging.")):
    coloredlogs.install(level=logging.DEBUG if verbose else logging.INFO,
                        fmt="%(asctime)s %(name)s %(levelname)s %(message)s")


def _fail(e: Exception) -> None:
    if isinstance(e, ReplicateError):
        logger.error("replicate %d failed (seed %d): %s", e.replicate, e.seed, e.cause)
    else:
        logger.error("%s", e)
    raise typer.Exit(code=1)


def _reference(value: Optional[str]) -> Optional[Union[int, str]]:
    if value is None:
        return None
    if value == MIN_VARIABILITY:
        return value
    try:
        return int(value)
    except ValueError:
        raise typer.BadParameter(f"expected a dimension index or '{MIN_VARIABILITY}', got '{value}'",
                                 param_hint="--reference-dim")


def _check_reference(config: MethodConfig, p: int) -> None:
    ref = config.reference_dim
    if isinstance(ref, int) and not 0 <= ref < p:
        raise typer.BadParameter(f"dimension {ref} outside [0, {p}) for {p} target(s)", param_hint="--reference-dim")


def _fractions(value: str) -> Tuple[float, float, float]:
    fractions = _floats(value, 3, "--split")
    if any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0, rel_tol=0, abs_tol=1e-9):
        raise typer.BadParameter(f"fractions must be non-negative and sum to 1, got '{value}'", param_hint="--split")
    return fractions


def _ints(value: str, count: int, hint: str) -> Tuple[int, ...]:
    try:
        out = tuple(int(v) for v in value.split(","))
    except ValueError:
        raise typer.BadParameter(f"expected {count} comma-separated integers, got '{value}'", param_hint=hint)
    if len(out) != count:
        raise typer.BadParameter(f"expected {count} comma-separated integers, got '{value}'", param_hint=hint)
    return out


def _floats(value: str, count: int, hint: str) -> Tuple[float, ...]:
    try:
        out = tuple(float(v) for v in value.split(","))
    except ValueError:
        raise typer.BadParameter(f"expected {count} comma-separated numbers, got '{value}'", param_hint=hint)
    if len(out) != count:
        raise typer.BadParameter(f"expected {count} comma-separated numbers, got '{value}'", param_hint=hint)
    return out


def _method_config(base: Optional[MethodConfig], **overrides) -> MethodConfig:
    data = base.model_dump() if base is not None else {}
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return MethodConfig.model_validate(data)
    except ValidationError as e:
        raise typer.BadParameter(str(e))


def _feature_map(features: Optional[str], d: int) -> FeatureMap:
    if not features:
        return FeatureMap.linear(d)
    try:
        fm = FeatureMap.from_terms("custom", [t for t in features.split(",") if t.strip()])
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--features")
    if fm.d_required > d:
        raise typer.BadParameter(f"features refer to x{fm.d_required} but the data has {d} covariate(s)",
                                 param_hint="--features")
    return fm


@app.command()
def simulate(
    builtin: Optional[Builtin] = typer.Option(None, "--builtin", help="Built-in scenario."),
    config: Optional[str] = typer.Option(None, "--config", help="Experiment file (.json or .toml)."),
    method: Optional[Method] = typer.Option(None, "--method"),
    alpha: Optional[float] = typer.Option(None, "--alpha"),
    replicates: Optional[int] = typer.Option(None, "--replicates", min=1),
    ntest: Optional[int] = typer.Option(None, "--ntest", min=1),
    seed: Optional[int] = typer.Option(None, "--seed"),
    reference_dim: Optional[str] = typer.Option(None, "--reference-dim"),
    correlation: Optional[Correlation] = typer.Option(None, "--correlation"),
    heteroskedastic: bool = typer.Option(False, "--heteroskedastic"),
    jobs: Optional[int] = typer.Option(None, "--jobs", min=1),
    out: str = typer.Option(Config.DEFAULT_OUT_DIR, "--out", help="Output directory."),
):
    """Monte-Carlo coverage experiment on a synthetic scenario."""
    if (builtin is None) == (config is None):
        raise typer.BadParameter("give exactly one of --builtin or --config")
    try:
        if config is not None:
            experiment = load_experiment(config)
            if correlation is not None or heteroskedastic:
                if experiment.scenario.builtin is None:
                    raise typer.BadParameter("--correlation/--heteroskedastic need a builtin scenario")
                experiment.scenario = ScenarioChoice(
                    builtin=experiment.scenario.builtin,
                    correlation=correlation.value if correlation else experiment.scenario.correlation,
                    heteroskedastic=heteroskedastic or experiment.scenario.heteroskedastic)
        else:
            experiment = ExperimentConfig(scenario=ScenarioChoice(
                builtin=builtin.value, correlation=correlation.value if correlation else None,
                heteroskedastic=heteroskedastic))
        method_config = _method_config(experiment.method, method=method.value if method else None, alpha=alpha,
                                       reference_dim=_reference(reference_dim))
        experiment = experiment.model_copy(update={
            'method': method_config,
            'replicates': replicates or experiment.replicates,
            'n_test': ntest or experiment.n_test,
            'seed': experiment.seed if seed is None else seed,
            'jobs': jobs or experiment.jobs,
        })
        spec = experiment.scenario_spec()
        _check_reference(method_config, spec.p)
        report, table = run_replicated(spec, method_config, experiment.replicates, seed=experiment.seed,
                                       jobs=experiment.jobs, show_progress=True)
    except HyperrectError as e:
        _fail(e)
    meta = {
        'method': method_config.method,
        'scenario': spec.name,
        'replicates': experiment.replicates,
        'n_test': experiment.n_test,
        'seed': experiment.seed,
        'alpha': method_config.alpha,
    }
    write_run(out, report, table, meta)
    logger.info("coverage %.4f, marginals %s, volume %.6g", report.overall_coverage,
                ", ".join(f"{m:.3f}" for m in report.marginal_coverage), report.mean_volume)


def _default_fractions(method: str) -> Tuple[float, float, float]:
    if method in ("chr-abs", "chr-signed"):
        return Config.SPLIT_FRACTIONS_TWO_STAGE
    if method == "bonf-naive":
        return Config.SPLIT_FRACTIONS_NAIVE
    return Config.SPLIT_FRACTIONS_ONE_STAGE


@app.command()
def fit(
    data: str = typer.Option(..., "--data", help="Headed CSV with targets and covariates."),
    targets: str = typer.Option(..., "--targets", help="Comma-separated response columns."),
    method: Method = typer.Option(Method.cqhr, "--method"),
    alpha: float = typer.Option(Config.ALPHA, "--alpha"),
    seed: int = typer.Option(0, "--seed"),
    reference_dim: str = typer.Option("0", "--reference-dim"),
    split: Optional[str] = typer.Option(None, "--split", help="train,cal1,cal2 fractions."),
    features: Optional[str] = typer.Option(None, "--features", help="Comma-separated terms, e.g. x1,x1*x2,x2^2."),
    model_out: str = typer.Option(..., "--model-out"),
):
    """Fit a predictor on a CSV and write a model file."""
    method_config = _method_config(None, method=method.value, alpha=alpha, reference_dim=_reference(reference_dim))
    fractions = _fractions(split) if split else _default_fractions(method.value)
    try:
        target_cols = parse_targets(targets)
        dataset, covariates = load_dataset(data, target_cols)
        _check_reference(method_config, dataset.p)
        feature_map = _feature_map(features, dataset.d)
        plan = make_split(dataset.n, fractions, seed)
        predictor = fit_method(method_config, dataset, plan, feature_map)
    except HyperrectError as e:
        _fail(e)
    save_model(model_out, FittedModel(predictor, method_config, target_cols, covariates, feature_map, seed,
                                      plan.sizes))


@app.command()
def predict(
    model: str = typer.Option(..., "--model"),
    data: str = typer.Option(..., "--data", help="CSV holding the model's covariate columns."),
    out: str = typer.Option(..., "--out", help="Predictions CSV."),
):
    """Prediction rectangles (<target>_lo, <target>_hi) for every row of a CSV."""
    try:
        fitted = load_model(model)
        x = load_covariates(data, fitted.covariates)
        lo, hi = fitted.predictor.predict_many(x)
    except HyperrectError as e:
        _fail(e)
    crossings = fitted.predictor.count_crossings(x)
    if crossings:
        logger.warning("repaired %d crossed quantile pair(s) while predicting", crossings)
    write_predictions(out, lo, hi, fitted.targets)
    logger.info("wrote %d prediction rectangle(s) to %s", lo.shape[0], out)


@app.command()
def permute(
    data: str = typer.Option(..., "--data"),
    targets: str = typer.Option(..., "--targets"),
    method: Method = typer.Option(Method.cqhr, "--method"),
    alpha: float = typer.Option(Config.ALPHA, "--alpha"),
    sizes: str = typer.Option(..., "--sizes", help="n_tr,n_cal1,n_cal2 (single-calibration methods pool cal1+cal2)."),
    ntest: Optional[int] = typer.Option(None, "--ntest", min=1, help="Test rows per permutation (default: the rest)."),
    permutations: int = typer.Option(Config.DESK_REPLICATES, "--permutations", min=1),
    seed: int = typer.Option(0, "--seed"),
    reference_dim: str = typer.Option("0", "--reference-dim"),
    features: Optional[str] = typer.Option(None, "--features"),
    jobs: int = typer.Option(1, "--jobs", min=1),
    out: str = typer.Option(Config.DEFAULT_OUT_DIR, "--out"),
):
    """Repeated random train/calibration/test splits of one CSV dataset."""
    method_config = _method_config(None, method=method.value, alpha=alpha, reference_dim=_reference(reference_dim))
    part_sizes = _ints(sizes, 3, "--sizes")
    try:
        dataset, _ = load_dataset(data, parse_targets(targets))
        _check_reference(method_config, dataset.p)
        feature_map = _feature_map(features, dataset.d)
        report, table = run_permutations(dataset, method_config, part_sizes, permutations, seed, ntest,
                                         feature_map, jobs, show_progress=True)
    except HyperrectError as e:
        _fail(e)
    meta = {
        'method': method_config.method,
        'scenario': f"permutations:{os.path.basename(data)}",
        'replicates': permutations,
        'n_test': report.n_test // permutations,
        'seed': seed,
        'alpha': method_config.alpha,
    }
    write_run(out, report, table, meta)
    logger.info("coverage %.4f over %d permutation(s)", report.overall_coverage, permutations)


if __name__ == "__main__":
    app()
