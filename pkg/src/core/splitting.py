import math
from typing import Optional, Sequence, Tuple

import numpy as np

from ..data.schemas import SplitPlan
from .errors import SplitTooSmallError

# Role ids for SeedSequence spawn keys; each (replicate, role) pair gets its own stream.
ROLE_DATA = 0
ROLE_TEST = 1
ROLE_SPLIT = 2


def make_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    """PCG64 generator for ``seed`` and an optional (replicate, role) key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.PCG64(ss))


def split_sizes(n: int, fractions: Sequence[float]) -> Tuple[int, int, int]:
    """Floor of n * fraction per part; the remainder goes to train."""
    if len(fractions) != 3:
        raise ValueError(f"expected three fractions, got {len(fractions)}")
    if any(f < 0 for f in fractions):
        raise ValueError(f"fractions must be non-negative: {tuple(fractions)}")
    if not math.isclose(sum(fractions), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError(f"fractions must sum to 1: {tuple(fractions)}")
    cal1 = math.floor(n * fractions[1] + 1e-9)
    cal2 = math.floor(n * fractions[2] + 1e-9)
    train = n - cal1 - cal2
    return train, cal1, cal2


def _permutation(n: int, seed: int, replicate: Optional[int]) -> np.ndarray:
    key = (ROLE_SPLIT,) if replicate is None else (replicate, ROLE_SPLIT)
    return make_rng(seed, *key).permutation(n)


def make_split_sizes(n: int, sizes: Sequence[int], seed: int,
                     required: Sequence[bool] = (True, True, True),
                     replicate: Optional[int] = None) -> SplitPlan:
    """
    Shuffle 0..n-1 with a seeded Fisher-Yates permutation and cut it into
    train / cal1 / cal2 of the given sizes. Rows beyond sum(sizes) are unused.
    ``replicate`` selects an independent permutation stream for the same seed.
    """
    sizes = [int(s) for s in sizes]
    if sum(sizes) > n:
        raise SplitTooSmallError(f"sizes {sizes} exceed n={n}")
    for name, size, req in zip(("train", "cal1", "cal2"), sizes, required):
        if req and size < 1:
            raise SplitTooSmallError(f"{name} part is empty (n={n})")
    perm = _permutation(n, seed, replicate)
    a, b = sizes[0], sizes[0] + sizes[1]
    return SplitPlan(
        train_idx=np.sort(perm[:a]),
        cal1_idx=np.sort(perm[a:b]),
        cal2_idx=np.sort(perm[b:b + sizes[2]]),
        seed=int(seed),
        n=n,
    )


def make_split(n: int, fractions: Sequence[float], seed: int) -> SplitPlan:
    """Deterministic three-way split; a zero fraction designates an empty part."""
    sizes = split_sizes(n, fractions)
    return make_split_sizes(n, sizes, seed, required=[f > 0 for f in fractions])


def make_holdout_split(n: int, sizes: Sequence[int], n_test: Optional[int], seed: int, replicate: int,
                       required: Sequence[bool] = (True, True, True)) -> Tuple[SplitPlan, np.ndarray]:
    """
    Like ``make_split_sizes`` plus a test part cut from the same permutation,
    right after cal2. ``n_test=None`` sends every remaining row to the test part.
    """
    sizes = [int(s) for s in sizes]
    used = sum(sizes)
    n_test = n - used if n_test is None else int(n_test)
    if n_test < 1 or used + n_test > n:
        raise SplitTooSmallError(f"sizes {sizes} leave no room for {n_test} test rows (n={n})")
    plan = make_split_sizes(n, sizes, seed, required, replicate)
    perm = _permutation(n, seed, replicate)
    return plan, np.sort(perm[used:used + n_test])
