import logging
import math
from typing import Sequence

import numpy as np

from ..data.schemas import EvaluationReport, MultiTargetDataset
from .errors import DimensionMismatchError
from .regions import RegionPredictor

logger = logging.getLogger(__name__)


def balance_statistic(marginal_coverage: Sequence[float]) -> float:
    """max_j |miscoverage_j - mean miscoverage|."""
    miss = 1.0 - np.asarray(marginal_coverage, dtype=float)
    return float(np.max(np.abs(miss - miss.mean())))


def product_diagnostics(marginal_coverage: Sequence[float]):
    """
    (prod_j marginal_j, (p - 1) / (2p) * (log prod_j marginal_j)^2).

    For conditionally independent dimensions the joint coverage sits between
    the product and the product plus the second term.
    """
    marg = np.asarray(marginal_coverage, dtype=float)
    p = marg.size
    product = float(np.prod(marg))
    if product <= 0:
        return product, math.inf
    return product, (p - 1) / (2 * p) * math.log(product) ** 2


def _binomial_se(rate: float, n: int) -> float:
    return math.sqrt(max(rate * (1.0 - rate), 0.0) / n)


def _mean_se(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    if not np.all(np.isfinite(values)):
        return math.nan
    return float(values.std(ddof=1) / math.sqrt(values.size))


def evaluate(predictor: RegionPredictor, test: MultiTargetDataset) -> EvaluationReport:
    """Coverage, side lengths, volume and balance of ``predictor`` on held-out rows."""
    lo, hi = predictor.predict_many(test.x)
    if lo.shape != test.y.shape:
        raise DimensionMismatchError(f"predictor gives {lo.shape[1]} dimensions, test data has {test.p}")

    inside = (lo <= test.y) & (test.y <= hi)
    joint = inside.all(axis=1)
    widths = hi - lo
    with np.errstate(invalid="ignore", over="ignore"):
        volumes = np.prod(widths, axis=1)
    infinite = int(np.sum(~np.isfinite(volumes)))
    if infinite:
        logger.warning("%d of %d test rectangles have an infinite side", infinite, test.n)

    n = test.n
    overall = float(joint.mean())
    marginal = inside.mean(axis=0)
    mean_lengths = widths.mean(axis=0)
    mean_volume = math.inf if infinite else float(volumes.mean())
    product, bound = product_diagnostics(marginal)

    ses = {
        'overall_coverage': _binomial_se(overall, n),
        'marginal_coverage': [_binomial_se(float(m), n) for m in marginal],
        'mean_lengths': [_mean_se(widths[:, j]) for j in range(widths.shape[1])],
        'mean_volume': _mean_se(volumes),
    }
    return EvaluationReport(
        overall_coverage=overall,
        marginal_coverage=[float(m) for m in marginal],
        mean_lengths=[float(v) for v in mean_lengths],
        mean_volume=mean_volume,
        balance_stat=balance_statistic(marginal),
        n_test=n,
        mc_standard_errors=ses,
        marginal_product=product,
        log_product_bound=bound,
        infinite_volume_count=infinite,
        crossings=getattr(predictor, 'crossings', 0) + predictor.count_crossings(test.x),
    )
