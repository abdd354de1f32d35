"""
Monte-Carlo loop: generate, split, fit, evaluate, aggregate.

Every replicate draws from its own (seed, replicate, role) streams, so the
per-replicate table and the aggregate are identical whether replicates run
in order, in parallel, or one at a time.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from ..data.experiment import MethodConfig
from ..data.schemas import EvaluationReport, MultiTargetDataset, SplitPlan
from .baselines import fit_absolute_max, fit_bonferroni_cqr, fit_naive_bonferroni
from .chr import SCORE_ABSOLUTE, SCORE_SIGNED, fit_chr
from .cqhr import fit_cqhr
from .errors import ReplicateError
from .features import FeatureMap
from .metrics import balance_statistic, evaluate, product_diagnostics
from .regions import RegionPredictor
from .simgen import ScenarioSpec, generate
from .splitting import make_holdout_split, make_split_sizes

logger = logging.getLogger(__name__)


def method_sizes(method: str, sizes: Sequence[int]) -> Tuple[Tuple[int, int, int], Tuple[bool, bool, bool]]:
    """
    Map a scenario's (n_tr, n_cal1, n_cal2) onto the parts a method uses.
    Single-calibration methods pool both calibration parts; the naive
    quantile baseline trains on every row.
    """
    n_tr, n_cal1, n_cal2 = (int(s) for s in sizes)
    if method in ("chr-abs", "chr-signed"):
        return (n_tr, n_cal1, n_cal2), (True, True, True)
    if method == "bonf-naive":
        return (n_tr + n_cal1 + n_cal2, 0, 0), (True, False, False)
    return (n_tr, n_cal1 + n_cal2, 0), (True, True, False)


def fit_method(config: MethodConfig, data: MultiTargetDataset, split: SplitPlan,
               feature_map: Optional[FeatureMap] = None) -> RegionPredictor:
    miscoverage = config.miscoverage()
    method = config.method
    if method in ("chr-abs", "chr-signed"):
        kind = SCORE_ABSOLUTE if method == "chr-abs" else SCORE_SIGNED
        return fit_chr(data, split, miscoverage, kind, feature_map, config.reference_dim, config.initial_level)
    if method == "cqhr":
        return fit_cqhr(data, split, miscoverage, feature_map, config.lo_level, config.hi_level,
                        config.reference_dim)
    if method == "absmax":
        return fit_absolute_max(data, split, miscoverage, feature_map)
    if method == "bonf-cqr":
        return fit_bonferroni_cqr(data, split, miscoverage, feature_map, config.lo_level, config.hi_level)
    if method == "bonf-naive":
        return fit_naive_bonferroni(data, split, miscoverage, feature_map)
    raise ValueError(f"unknown method '{method}'")


def report_row(replicate: int, seed: int, report: EvaluationReport) -> dict:
    row = {
        'replicate': replicate,
        'seed': seed,
        'coverage': report.overall_coverage,
        'volume': report.mean_volume,
        'balance_stat': report.balance_stat,
        'infinite_volume': report.infinite_volume_count,
        'crossings': report.crossings,
    }
    for j, m in enumerate(report.marginal_coverage, start=1):
        row[f'marg_{j}'] = m
    for j, length in enumerate(report.mean_lengths, start=1):
        row[f'len_{j}'] = length
    return row


def run_replicate(spec: ScenarioSpec, config: MethodConfig, replicate: int, seed: int) -> EvaluationReport:
    try:
        data, test = generate(spec, replicate, seed)
        sizes, required = method_sizes(config.method, spec.sizes.as_tuple())
        split = make_split_sizes(data.n, sizes, seed, required, replicate)
        predictor = fit_method(config, data, split, spec.feature_map())
        return evaluate(predictor, test)
    except ReplicateError:
        raise
    except Exception as e:
        raise ReplicateError(replicate, seed, e) from e


def aggregate(reports: List[EvaluationReport]) -> EvaluationReport:
    """
    Means over replicates with simulation standard errors. A single report
    is returned unchanged.
    """
    if not reports:
        raise ValueError("nothing to aggregate")
    if len(reports) == 1:
        return reports[0]
    r = len(reports)
    cov = np.array([rep.overall_coverage for rep in reports])
    marg = np.array([rep.marginal_coverage for rep in reports])
    lengths = np.array([rep.mean_lengths for rep in reports])
    vol = np.array([rep.mean_volume for rep in reports])

    def se(a):
        with np.errstate(invalid="ignore"):
            out = np.std(a, axis=0, ddof=1) / math.sqrt(r)
        return out

    marginal = marg.mean(axis=0)
    product, bound = product_diagnostics(marginal)
    infinite = int(sum(rep.infinite_volume_count for rep in reports))
    return EvaluationReport(
        overall_coverage=float(cov.mean()),
        marginal_coverage=[float(m) for m in marginal],
        mean_lengths=[float(v) for v in lengths.mean(axis=0)],
        mean_volume=math.inf if not np.all(np.isfinite(vol)) else float(vol.mean()),
        balance_stat=balance_statistic(marginal),
        n_test=int(sum(rep.n_test for rep in reports)),
        mc_standard_errors={
            'overall_coverage': float(se(cov)),
            'marginal_coverage': [float(v) for v in se(marg)],
            'mean_lengths': [float(v) for v in se(lengths)],
            'mean_volume': float(se(vol)) if np.all(np.isfinite(vol)) else math.nan,
        },
        marginal_product=product,
        log_product_bound=bound,
        infinite_volume_count=infinite,
        crossings=int(sum(rep.crossings for rep in reports)),
    )


def _collect(reports: List[Tuple[int, EvaluationReport]], seed: int) -> Tuple[EvaluationReport, pd.DataFrame]:
    reports = sorted(reports, key=lambda t: t[0])
    table = pd.DataFrame([report_row(i, seed, rep) for i, rep in reports])
    return aggregate([rep for _, rep in reports]), table


def _run(task, indices: Sequence[int], jobs: int, show_progress: bool, desc: str):
    if jobs > 1:
        results = Parallel(n_jobs=jobs)(delayed(task)(i) for i in indices)
        return list(zip(indices, results))
    out = []
    for i in tqdm(indices, desc=desc, disable=not show_progress):
        out.append((i, task(i)))
    return out


class _ScenarioTask:
    def __init__(self, spec: ScenarioSpec, config: MethodConfig, seed: int):
        self.spec, self.config, self.seed = spec, config, seed

    def __call__(self, replicate: int) -> EvaluationReport:
        return run_replicate(self.spec, self.config, replicate, self.seed)


def run_replicated(spec: ScenarioSpec, config: MethodConfig, replicates: int, n_test: Optional[int] = None,
                   seed: Optional[int] = None, jobs: int = 1,
                   show_progress: bool = False) -> Tuple[EvaluationReport, pd.DataFrame]:
    """Aggregate report plus one table row per replicate (sorted by replicate)."""
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    seed = spec.seed if seed is None else int(seed)
    if n_test is not None and n_test != spec.n_test:
        spec = ScenarioSpec.model_validate({**spec.model_dump(), 'n_test': int(n_test)})
    logger.info("%s on %s: %d replicate(s) x %d test points, seed %d",
                config.method, spec.name, replicates, spec.n_test, seed)
    results = _run(_ScenarioTask(spec, config, seed), list(range(replicates)), jobs, show_progress, spec.name)
    return _collect(results, seed)


class _PermutationTask:
    def __init__(self, data: MultiTargetDataset, config: MethodConfig, sizes: Sequence[int],
                 n_test: Optional[int], seed: int, feature_map: Optional[FeatureMap]):
        self.data, self.config, self.sizes = data, config, tuple(sizes)
        self.n_test, self.seed, self.feature_map = n_test, seed, feature_map

    def __call__(self, permutation: int) -> EvaluationReport:
        try:
            sizes, required = method_sizes(self.config.method, self.sizes)
            split, test_idx = make_holdout_split(self.data.n, sizes, self.n_test, self.seed, permutation, required)
            predictor = fit_method(self.config, self.data, split, self.feature_map)
            return evaluate(predictor, self.data.subset(test_idx))
        except ReplicateError:
            raise
        except Exception as e:
            raise ReplicateError(permutation, self.seed, e) from e


def run_permutations(data: MultiTargetDataset, config: MethodConfig, sizes: Sequence[int], permutations: int,
                     seed: int = 0, n_test: Optional[int] = None, feature_map: Optional[FeatureMap] = None,
                     jobs: int = 1, show_progress: bool = False) -> Tuple[EvaluationReport, pd.DataFrame]:
    """
    Repeated random train / calibration / test splits of one fixed dataset.
    ``sizes`` is (n_tr, n_cal1, n_cal2) as for a two-stage method; the rows
    left over (or ``n_test`` of them) are the test part of each permutation.
    """
    if permutations < 1:
        raise ValueError(f"permutations must be >= 1, got {permutations}")
    logger.info("%s: %d permutation(s) of %d rows, sizes %s, seed %d",
                config.method, permutations, data.n, tuple(sizes), seed)
    task = _PermutationTask(data, config, sizes, n_test, int(seed), feature_map)
    results = _run(task, list(range(permutations)), jobs, show_progress, "permutations")
    return _collect(results, int(seed))
