import math
from decimal import Decimal
from typing import Sequence

import numpy as np

from .errors import EmptyScoreSetError, InvalidLevelError


def quantile_rank(n: int, delta: float) -> int:
    """1-based rank k = ceil(delta * (n + 1)) used by the conformal quantile."""
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise InvalidLevelError(delta)
    # decimal arithmetic on the shortest repr: 0.9 * 10 is exactly 9, not 9.000000000000002
    return max(1, math.ceil(Decimal(repr(delta)) * (n + 1)))


def inflated_empirical_quantile(values: Sequence[float], delta: float) -> float:
    """
    The k-th smallest of ``values`` with k = ceil(delta * (n + 1)).

    Returns +inf when k > n: no finite threshold carries the guarantee, so the
    conformal set is the whole line in that direction. Ties occupy
    consecutive ranks.
    """
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise EmptyScoreSetError()
    k = quantile_rank(arr.size, delta)
    if k > arr.size:
        return math.inf
    return float(np.partition(arr, k - 1)[k - 1])


def inflated_quantiles(scores: np.ndarray, delta: float) -> np.ndarray:
    """Column-wise inflated quantile of an (n x p) score matrix."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 1:
        scores = scores[:, np.newaxis]
    if scores.shape[0] == 0:
        raise EmptyScoreSetError()
    k = quantile_rank(scores.shape[0], delta)
    if k > scores.shape[0]:
        return np.full(scores.shape[1], math.inf)
    return np.partition(scores, k - 1, axis=0)[k - 1].astype(float)
