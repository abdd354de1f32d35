"""
Comparison methods: the max-absolute-residual hypercube, conformalized
quantile regression with a Bonferroni split, and raw Bonferroni quantiles.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..data.schemas import MiscoverageConfig, MultiTargetDataset, SplitPlan
from .chr import interval_scores
from .errors import SplitTooSmallError
from .features import FeatureMap
from .models import PointModel, QuantileModel, fit_least_squares, fit_quantile_model
from .quantiles import inflated_empirical_quantile, inflated_quantiles
from .regions import RegionPredictor, collapse_inverted

logger = logging.getLogger(__name__)


def bonferroni_levels(alpha: float, p: int) -> Tuple[float, float]:
    """Quantile levels putting alpha / (2p) in each tail of each dimension."""
    tail = alpha / (2 * p)
    return tail, 1.0 - tail


@dataclass(frozen=True, eq=False)
class AbsoluteMaxPredictor(RegionPredictor):
    """Hypercube f(x) +/- h with h calibrated on max_j |y_j - f_j(x)|."""
    point_model: PointModel
    halfwidth: float
    config: MiscoverageConfig

    kind = "absmax"

    def predict_many(self, x) -> Tuple[np.ndarray, np.ndarray]:
        f = np.atleast_2d(self.point_model.predict(np.atleast_2d(x)))
        return f - self.halfwidth, f + self.halfwidth

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'point_model': self.point_model.to_dict(),
                'halfwidth': self.halfwidth, 'config': self.config.to_dict()}

    @staticmethod
    def from_dict(data: dict) -> "AbsoluteMaxPredictor":
        return AbsoluteMaxPredictor(PointModel.from_dict(data['point_model']), float(data['halfwidth']),
                                    MiscoverageConfig(**data['config']))


@dataclass(frozen=True, eq=False)
class MarginalQuantilePredictor(RegionPredictor):
    """Product of per-dimension quantile intervals, each widened by its own adjustment."""
    quantile_model: QuantileModel
    adjustments: np.ndarray
    config: MiscoverageConfig
    kind: str = "bonf-cqr"
    crossings: int = 0

    def count_crossings(self, x) -> int:
        return int(self.quantile_model.predict(np.atleast_2d(x)).crossed.sum())

    def predict_many(self, x) -> Tuple[np.ndarray, np.ndarray]:
        band = self.quantile_model.predict(np.atleast_2d(x))
        return collapse_inverted(band.lo - self.adjustments, band.hi + self.adjustments)

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'quantile_model': self.quantile_model.to_dict(),
                'adjustments': np.asarray(self.adjustments).tolist(), 'config': self.config.to_dict(),
                'crossings': self.crossings}

    @staticmethod
    def from_dict(data: dict) -> "MarginalQuantilePredictor":
        return MarginalQuantilePredictor(QuantileModel.from_dict(data['quantile_model']),
                                         np.array(data['adjustments'], dtype=float),
                                         MiscoverageConfig(**data['config']), data['kind'],
                                         int(data.get('crossings', 0)))


def calibrate_absolute_max(point_model: PointModel, cal: MultiTargetDataset,
                           config: MiscoverageConfig) -> AbsoluteMaxPredictor:
    v = np.abs(cal.y - point_model.predict(cal.x)).max(axis=1)
    return AbsoluteMaxPredictor(point_model, inflated_empirical_quantile(v, 1.0 - config.alpha), config)


def fit_absolute_max(data: MultiTargetDataset, split: SplitPlan, config: MiscoverageConfig,
                     feature_map: Optional[FeatureMap] = None) -> AbsoluteMaxPredictor:
    cal_idx = split.cal_idx
    if split.train_idx.size < 1 or cal_idx.size < 1:
        raise SplitTooSmallError(f"absolute-max needs non-empty train and calibration parts, got {split.sizes}")
    feature_map = feature_map or FeatureMap.linear(data.d)
    model = fit_least_squares(data.subset(split.train_idx), feature_map)
    return calibrate_absolute_max(model, data.subset(cal_idx), config)


def calibrate_bonferroni_cqr(quantile_model: QuantileModel, cal: MultiTargetDataset,
                             config: MiscoverageConfig) -> MarginalQuantilePredictor:
    """Univariate CQR per dimension at miscoverage alpha / p, symmetric expansion."""
    band = quantile_model.predict(cal.x)
    e = interval_scores(band.lo, band.hi, cal.y)
    adjustments = inflated_quantiles(e, 1.0 - config.alpha / cal.p)
    return MarginalQuantilePredictor(quantile_model, adjustments, config, "bonf-cqr", int(band.crossed.sum()))


def fit_bonferroni_cqr(data: MultiTargetDataset, split: SplitPlan, config: MiscoverageConfig,
                       feature_map: Optional[FeatureMap] = None, lo_level: Optional[float] = None,
                       hi_level: Optional[float] = None) -> MarginalQuantilePredictor:
    cal_idx = split.cal_idx
    if split.train_idx.size < 1 or cal_idx.size < 1:
        raise SplitTooSmallError(f"bonferroni cqr needs non-empty train and calibration parts, got {split.sizes}")
    default_lo, default_hi = bonferroni_levels(config.alpha, data.p)
    feature_map = feature_map or FeatureMap.linear(data.d)
    model = fit_quantile_model(data.subset(split.train_idx), feature_map,
                               default_lo if lo_level is None else lo_level,
                               default_hi if hi_level is None else hi_level)
    return calibrate_bonferroni_cqr(model, data.subset(cal_idx), config)


def naive_bonferroni(quantile_model: QuantileModel, config: MiscoverageConfig) -> MarginalQuantilePredictor:
    return MarginalQuantilePredictor(quantile_model, np.zeros(quantile_model.p), config, "bonf-naive")


def fit_naive_bonferroni(data: MultiTargetDataset, split: SplitPlan, config: MiscoverageConfig,
                         feature_map: Optional[FeatureMap] = None) -> MarginalQuantilePredictor:
    """Bonferroni-level quantile models on the training fold only; no conformal step."""
    if split.train_idx.size < 1:
        raise SplitTooSmallError("naive bonferroni needs a non-empty training part")
    lo_level, hi_level = bonferroni_levels(config.alpha, data.p)
    feature_map = feature_map or FeatureMap.linear(data.d)
    model = fit_quantile_model(data.subset(split.train_idx), feature_map, lo_level, hi_level)
    return naive_bonferroni(model, config)
