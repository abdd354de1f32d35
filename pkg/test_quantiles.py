import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.errors import EmptyScoreSetError, InvalidLevelError
from src.core.quantiles import inflated_empirical_quantile, inflated_quantiles, quantile_rank


def _oracle(values, delta):
    """Sort-and-index, written independently of the library code."""
    ordered = sorted(values)
    n = len(ordered)
    k = 1
    while k < delta * (n + 1) - 1e-9:
        k += 1
    return math.inf if k > n else ordered[k - 1]


def test_documented_examples():
    print("=== Testing inflated quantile examples ===")
    assert inflated_empirical_quantile(list(range(1, 10)), 0.9) == 9
    assert inflated_empirical_quantile([5], 0.5) == 5
    assert inflated_empirical_quantile(list(range(1, 20)), 0.9) == 18
    assert inflated_empirical_quantile(list(range(1, 10)), 0.99) == math.inf


def test_rank_is_exact_for_decimal_levels():
    assert quantile_rank(9, 0.9) == 9
    assert quantile_rank(99, 0.9) == 90
    assert quantile_rank(19, 0.95) == 19
    assert quantile_rank(1, 0.01) == 1


def test_errors():
    with pytest.raises(EmptyScoreSetError, match="empty score set"):
        inflated_empirical_quantile([], 0.5)
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(InvalidLevelError, match="invalid level"):
            inflated_empirical_quantile([1.0, 2.0], bad)


def test_ties_take_consecutive_ranks():
    assert inflated_empirical_quantile([2, 2, 2, 1], 0.5) == 2
    assert inflated_empirical_quantile([1, 1, 3, 3], 0.3) == 1


def test_columnwise_matches_scalar():
    rng = np.random.default_rng(3)
    scores = rng.normal(size=(37, 4))
    col = inflated_quantiles(scores, 0.8)
    for j in range(4):
        assert col[j] == inflated_empirical_quantile(scores[:, j], 0.8)
    assert np.all(np.isinf(inflated_quantiles(scores[:3], 0.9)))


def test_oracle_equivalence_random_instances():
    print("=== Oracle equivalence over 10,000 instances ===")
    rng = np.random.default_rng(20240601)
    for _ in range(10_000):
        n = int(rng.integers(1, 60))
        values = np.round(rng.normal(size=n), int(rng.integers(0, 4))).tolist()
        delta = float(np.round(rng.uniform(0.01, 0.99), int(rng.integers(1, 4))))
        if not 0 < delta < 1:
            continue
        assert inflated_empirical_quantile(values, delta) == _oracle(values, delta)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40),
       st.floats(0.01, 0.98), st.floats(0.0, 0.01))
def test_monotone_in_level(values, delta, step):
    assert inflated_empirical_quantile(values, delta) <= inflated_empirical_quantile(values, delta + step)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40), st.floats(0.01, 0.99), st.randoms())
def test_permutation_invariant(values, delta, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert inflated_empirical_quantile(values, delta) == inflated_empirical_quantile(shuffled, delta)


def test_exchangeability_frequency():
    print("=== Quantile exchangeability by simulation ===")
    rng = np.random.default_rng(11)
    n, delta, draws = 19, 0.8, 20_000
    samples = rng.normal(size=(draws, n + 1))
    hits = 0
    for row in samples:
        hits += row[n] <= inflated_empirical_quantile(row[:n], delta)
    rate = hits / draws
    se = math.sqrt(0.25 / draws)
    assert delta - 3 * se <= rate <= delta + 1 / (n + 1) + 3 * se


if __name__ == "__main__":
    test_documented_examples()
    test_rank_is_exact_for_decimal_levels()
    test_errors()
    test_ties_take_consecutive_ranks()
    test_columnwise_matches_scalar()
    test_oracle_equivalence_random_instances()
    test_exchangeability_frequency()
    print("quantile tests passed")
