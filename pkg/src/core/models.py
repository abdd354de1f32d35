import logging
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
from scipy.optimize import linprog

from ..config import Config
from ..data.schemas import MultiTargetDataset, _frozen
from .errors import (ConvergenceError, DimensionMismatchError, InvalidLevelError,
                     SingularDesignError, UnderdeterminedError)
from .features import FeatureMap

logger = logging.getLogger(__name__)


def _rows(x, d: int) -> Tuple[np.ndarray, bool]:
    """Covariates as a 2-D array plus whether the caller passed a single row."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != d:
        raise DimensionMismatchError(f"expected {d} covariates, got {arr.shape[1]}")
    return arr, single


@dataclass(frozen=True)
class PointModel:
    """Per-dimension linear-in-features regression f_j(x) = coef[j] . phi(x)."""
    coef: np.ndarray  # (p, m)
    feature_map: FeatureMap
    d: int

    def __post_init__(self):
        coef = np.atleast_2d(np.asarray(self.coef, dtype=float))
        if coef.shape[1] != self.feature_map.m:
            raise DimensionMismatchError(
                f"{coef.shape[1]} coefficients per dimension, feature map has {self.feature_map.m}")
        object.__setattr__(self, "coef", _frozen(coef))

    @property
    def p(self) -> int:
        return self.coef.shape[0]

    def predict(self, x) -> np.ndarray:
        arr, single = _rows(x, self.d)
        out = self.feature_map.expand(arr) @ self.coef.T
        return out[0] if single else out

    def to_dict(self):
        return {'coef': self.coef.tolist(), 'feature_map': self.feature_map.to_dict(), 'd': self.d}

    @staticmethod
    def from_dict(data: dict) -> "PointModel":
        return PointModel(np.array(data['coef']), FeatureMap.from_dict(data['feature_map']), int(data['d']))


class QuantileBand(NamedTuple):
    lo: np.ndarray
    hi: np.ndarray
    crossed: np.ndarray  # bool, same shape as lo


@dataclass(frozen=True)
class QuantileModel:
    """Lower and upper conditional quantile surfaces for each response dimension."""
    coef_lo: np.ndarray  # (p, m)
    coef_hi: np.ndarray  # (p, m)
    lo_level: float
    hi_level: float
    feature_map: FeatureMap
    d: int

    def __post_init__(self):
        lo = np.atleast_2d(np.asarray(self.coef_lo, dtype=float))
        hi = np.atleast_2d(np.asarray(self.coef_hi, dtype=float))
        if lo.shape != hi.shape or lo.shape[1] != self.feature_map.m:
            raise DimensionMismatchError(f"coefficient shapes {lo.shape} / {hi.shape} do not match the feature map")
        if not 0.0 < self.lo_level < self.hi_level < 1.0:
            raise ValueError(f"need 0 < lo_level < hi_level < 1, got ({self.lo_level}, {self.hi_level})")
        object.__setattr__(self, "coef_lo", _frozen(lo))
        object.__setattr__(self, "coef_hi", _frozen(hi))

    @property
    def p(self) -> int:
        return self.coef_lo.shape[0]

    def predict(self, x) -> QuantileBand:
        """Both surfaces at ``x``; crossed pairs are swapped and flagged."""
        arr, single = _rows(x, self.d)
        phi = self.feature_map.expand(arr)
        lo = phi @ self.coef_lo.T
        hi = phi @ self.coef_hi.T
        crossed = lo > hi
        if crossed.any():
            lo, hi = np.where(crossed, hi, lo), np.where(crossed, lo, hi)
        if single:
            return QuantileBand(lo[0], hi[0], crossed[0])
        return QuantileBand(lo, hi, crossed)

    def to_dict(self):
        return {
            'coef_lo': self.coef_lo.tolist(),
            'coef_hi': self.coef_hi.tolist(),
            'lo_level': self.lo_level,
            'hi_level': self.hi_level,
            'feature_map': self.feature_map.to_dict(),
            'd': self.d,
        }

    @staticmethod
    def from_dict(data: dict) -> "QuantileModel":
        return QuantileModel(np.array(data['coef_lo']), np.array(data['coef_hi']),
                             float(data['lo_level']), float(data['hi_level']),
                             FeatureMap.from_dict(data['feature_map']), int(data['d']))


def pinball_loss(residuals: np.ndarray, tau: float) -> float:
    """Mean of u * (tau - 1{u < 0})."""
    u = np.asarray(residuals, dtype=float)
    return float(np.mean(u * (tau - (u < 0))))


def _design(train: MultiTargetDataset, feature_map: FeatureMap) -> np.ndarray:
    phi = feature_map.expand(train.x)
    if phi.shape[0] < phi.shape[1]:
        raise UnderdeterminedError(phi.shape[0], phi.shape[1])
    return phi


def fit_least_squares(train: MultiTargetDataset, feature_map: FeatureMap) -> PointModel:
    """Ordinary least squares per response dimension on a shared feature basis."""
    phi = _design(train, feature_map)
    # pivoted QR exposes rank deficiency before lstsq quietly returns a minimum-norm fit
    _, r, _ = scipy.linalg.qr(phi, mode='economic', pivoting=True)
    diag = np.abs(np.diag(r))
    tol = Config.LSTSQ_RANK_TOL * max(phi.shape) * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < phi.shape[1]:
        raise SingularDesignError(rank, phi.shape[1])
    coef, *_ = scipy.linalg.lstsq(phi, train.y)
    return PointModel(coef.T, feature_map, train.d)


def _pinball_lp(phi: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    """
    Linear program for linear quantile regression, solved by HiGHS:

        min  tau/n * sum(u) + (1 - tau)/n * sum(v)
        s.t. phi @ beta + u - v = y,  u, v >= 0,  beta free
    """
    n, m = phi.shape
    c = np.concatenate([np.zeros(m), np.full(n, tau / n), np.full(n, (1.0 - tau) / n)])
    bounds = [(None, None)] * m + [(0, None)] * (2 * n)
    eye = sparse.identity(n, format='csr')
    a_eq = sparse.hstack([sparse.csr_matrix(phi), eye, -eye], format='csr')
    res = linprog(c, A_eq=a_eq, b_eq=y, bounds=bounds, method='highs',
                  options={'maxiter': Config.PINBALL_MAX_ITER,
                           'primal_feasibility_tolerance': Config.PINBALL_TOL,
                           'dual_feasibility_tolerance': Config.PINBALL_TOL})
    if not res.success or res.x is None:
        gap = float('inf')
        if res.x is not None and getattr(res, 'eqlin', None) is not None:
            gap = float(res.fun - y @ res.eqlin.marginals)
        raise ConvergenceError(f"pinball regression at tau={tau} did not converge: {res.message}", gap)
    return res.x[:m]


def fit_pinball_linear(train: MultiTargetDataset, feature_map: FeatureMap, tau: float) -> np.ndarray:
    """Per-dimension coefficients (p x m) minimizing the mean pinball loss at level ``tau``."""
    if not 0.0 < tau < 1.0:
        raise InvalidLevelError(tau)
    phi = _design(train, feature_map)
    return np.vstack([_pinball_lp(phi, train.y[:, j], tau) for j in range(train.p)])


def fit_quantile_model(train: MultiTargetDataset, feature_map: FeatureMap,
                       lo_level: float, hi_level: float) -> QuantileModel:
    if not lo_level < hi_level:
        raise ValueError(f"lo_level {lo_level} must be below hi_level {hi_level}")
    coef_lo = fit_pinball_linear(train, feature_map, lo_level)
    coef_hi = fit_pinball_linear(train, feature_map, hi_level)
    logger.debug("fitted quantile model (%s, %s) on %d rows", lo_level, hi_level, train.n)
    return QuantileModel(coef_lo, coef_hi, lo_level, hi_level, feature_map, train.d)


def predict_point(model: PointModel, x) -> np.ndarray:
    return model.predict(x)


def predict_quantiles(model: QuantileModel, x) -> QuantileBand:
    return model.predict(x)
