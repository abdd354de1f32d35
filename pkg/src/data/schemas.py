from dataclasses import dataclass, field, asdict
from typing import List, Optional, Dict, Any, Sequence
import math

import numpy as np

from ..core.errors import DimensionMismatchError, InvertedIntervalError, SplitTooSmallError


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.flags.writeable = False
    return arr


def _frozen_idx(idx) -> np.ndarray:
    arr = np.array(idx, dtype=np.int64, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class MultiTargetDataset:
    """Covariates ``x`` (n x d) paired with responses ``y`` (n x p)."""
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim == 1:
            x = x[:, np.newaxis]
        if y.ndim == 1:
            y = y[:, np.newaxis]
        if x.ndim != 2 or y.ndim != 2:
            raise DimensionMismatchError("x and y must be 2-D matrices")
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatchError(f"row count mismatch: x has {x.shape[0]}, y has {y.shape[0]}")
        if x.shape[0] < 1 or x.shape[1] < 1 or y.shape[1] < 1:
            raise DimensionMismatchError("dataset needs n >= 1, d >= 1, p >= 1")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset entries must be finite")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    def subset(self, idx: Sequence[int]) -> "MultiTargetDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return MultiTargetDataset(self.x[idx], self.y[idx])

    def scaled(self, dim: int, factor: float) -> "MultiTargetDataset":
        """Copy with response dimension ``dim`` multiplied by ``factor``."""
        y = np.array(self.y)
        y[:, dim] *= factor
        return MultiTargetDataset(self.x, y)


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint train / first-calibration / second-calibration index sets."""
    train_idx: np.ndarray
    cal1_idx: np.ndarray
    cal2_idx: np.ndarray
    seed: int
    n: int

    def __post_init__(self):
        parts = [_frozen_idx(self.train_idx), _frozen_idx(self.cal1_idx), _frozen_idx(self.cal2_idx)]
        for name, part in zip(("train_idx", "cal1_idx", "cal2_idx"), parts):
            object.__setattr__(self, name, part)
        joined = np.concatenate(parts)
        if joined.size and (joined.min() < 0 or joined.max() >= self.n):
            raise SplitTooSmallError(f"index outside [0, {self.n})")
        if np.unique(joined).size != joined.size:
            raise ValueError("split parts overlap")

    @property
    def sizes(self) -> List[int]:
        return [self.train_idx.size, self.cal1_idx.size, self.cal2_idx.size]

    @property
    def cal_idx(self) -> np.ndarray:
        """Both calibration parts stacked, for single-calibration methods."""
        return np.concatenate([self.cal1_idx, self.cal2_idx])


@dataclass(frozen=True)
class Hyperrectangle:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatchError(f"lo has {lo.size} entries, hi has {hi.size}")
        bad = np.flatnonzero(~(lo <= hi))
        if bad.size:
            j = int(bad[0])
            raise InvertedIntervalError(lo[j], hi[j])
        object.__setattr__(self, "lo", _frozen(lo))
        object.__setattr__(self, "hi", _frozen(hi))

    @property
    def p(self) -> int:
        return self.lo.size

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, y) -> bool:
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != self.p:
            raise DimensionMismatchError(f"point has {y.size} entries, rectangle has {self.p}")
        return bool(np.all((self.lo <= y) & (y <= self.hi)))

    def to_dict(self):
        return {'lo': self.lo.tolist(), 'hi': self.hi.tolist()}


@dataclass(frozen=True)
class MiscoverageConfig:
    """Target miscoverage ``alpha`` and its split into lower/upper tails."""
    alpha: float
    alpha_lo: Optional[float] = None
    alpha_hi: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        lo, hi = self.alpha_lo, self.alpha_hi
        if lo is None and hi is None:
            lo = hi = self.alpha / 2
        elif lo is None:
            lo = self.alpha - hi
        elif hi is None:
            hi = self.alpha - lo
        if lo < 0 or hi < 0 or not math.isclose(lo + hi, self.alpha, rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"tail split ({lo}, {hi}) must be non-negative and sum to alpha={self.alpha}")
        object.__setattr__(self, "alpha_lo", float(lo))
        object.__setattr__(self, "alpha_hi", float(hi))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SideRatios:
    """Constant side lengths of the initial rectangle and the reference dimension."""
    reference_dim: int
    lengths: np.ndarray

    def __post_init__(self):
        lengths = _frozen(self.lengths)
        if not 0 <= self.reference_dim < lengths.size:
            raise DimensionMismatchError(f"reference_dim {self.reference_dim} outside [0, {lengths.size})")
        if np.any(~(lengths > 0)):
            raise ValueError("side lengths must be positive")
        object.__setattr__(self, "lengths", lengths)

    def ratio(self, j: int) -> float:
        """Factor converting dimension ``j`` units into reference units."""
        return float(self.lengths[self.reference_dim] / self.lengths[j])

    def ratios(self) -> np.ndarray:
        """All conversion factors; unbounded sides convert to 0."""
        with np.errstate(invalid="ignore"):
            r = self.lengths[self.reference_dim] / self.lengths
        return np.where(np.isinf(self.lengths), 0.0, r)


@dataclass(frozen=True)
class ScoreSet:
    """Calibration scores: first-stage ``v``, interval scores ``e``, row maxima ``w``."""
    v: np.ndarray
    e: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("v", "e", "w"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


@dataclass
class EvaluationReport:
    overall_coverage: float
    marginal_coverage: List[float]
    mean_lengths: List[float]
    mean_volume: float
    balance_stat: float
    n_test: int
    mc_standard_errors: Dict[str, Any] = field(default_factory=dict)
    marginal_product: float = float("nan")
    log_product_bound: float = float("nan")
    infinite_volume_count: int = 0
    crossings: int = 0

    @property
    def p(self) -> int:
        return len(self.marginal_coverage)

    def to_dict(self):
        return asdict(self)
