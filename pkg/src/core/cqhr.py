"""
Conformal quantile hyperrectangular regression.

Initial sides come from lower/upper conditional quantile surfaces, so side
lengths vary with x. Interval scores are converted to the reference
dimension point by point; the single stored adjustment lives in reference
units and is rescaled at each query point.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..data.schemas import Hyperrectangle, MiscoverageConfig, MultiTargetDataset, ScoreSet, SplitPlan
from .chr import interval_scores
from .errors import DegenerateSideError, SplitTooSmallError
from .features import FeatureMap
from .models import QuantileModel, fit_quantile_model
from .quantiles import inflated_empirical_quantile
from .regions import ReferenceChoice, RegionPredictor, collapse_inverted, floor_sides, resolve_reference

logger = logging.getLogger(__name__)


def convert_to_reference(e: float, len_ref: float, len_j: float) -> float:
    """Score ``e`` measured on a side of length ``len_j`` expressed on a side of length ``len_ref``."""
    if not (len_ref > 0 and len_j > 0):
        raise DegenerateSideError(f"side lengths must be positive, got len_ref={len_ref}, len_j={len_j}")
    return e * len_ref / len_j


@dataclass(frozen=True, eq=False)
class CqhrPredictor(RegionPredictor):
    quantile_model: QuantileModel
    reference_dim: int
    adj_ref: float
    config: MiscoverageConfig
    crossings: int = 0
    floored_sides: int = 0
    scores: Optional[ScoreSet] = field(default=None, compare=False, repr=False)

    kind = "cqhr"

    @property
    def p(self) -> int:
        return self.quantile_model.p

    def count_crossings(self, x) -> int:
        return int(self.quantile_model.predict(np.atleast_2d(x)).crossed.sum())

    def side_lengths(self, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        """Repaired quantile band at ``x`` and its floored side lengths."""
        band = self.quantile_model.predict(np.atleast_2d(x))
        lengths, _ = floor_sides(band.hi - band.lo, "cqhr query")
        return band.lo, band.hi, lengths, int(band.crossed.sum())

    def adjustments(self, x) -> np.ndarray:
        """Per-point adjustments Adj_ref * len_j(x) / len_ref(x), shape (n, p)."""
        _, _, lengths, _ = self.side_lengths(x)
        return self._scale(lengths)

    def _scale(self, lengths: np.ndarray) -> np.ndarray:
        ratio = lengths / lengths[:, [self.reference_dim]]
        if math.isinf(self.adj_ref):
            return np.full_like(ratio, self.adj_ref)
        return self.adj_ref * ratio

    def predict_many(self, x) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi, lengths, _ = self.side_lengths(x)
        adj = self._scale(lengths)
        return collapse_inverted(lo - adj, hi + adj)

    def calibration_scores(self, data: MultiTargetDataset) -> Tuple[np.ndarray, np.ndarray]:
        """(E, W) for arbitrary labelled rows, scored exactly as the calibration fold was."""
        lo, hi, lengths, _ = self.side_lengths(data.x)
        e = interval_scores(lo, hi, data.y)
        w = (e * (lengths[:, [self.reference_dim]] / lengths)).max(axis=1)
        return e, w

    def to_dict(self) -> dict:
        return {
            'kind': self.kind,
            'quantile_model': self.quantile_model.to_dict(),
            'reference_dim': self.reference_dim,
            'adj_ref': self.adj_ref,
            'config': self.config.to_dict(),
            'crossings': self.crossings,
            'floored_sides': self.floored_sides,
        }

    @staticmethod
    def from_dict(data: dict) -> "CqhrPredictor":
        return CqhrPredictor(
            quantile_model=QuantileModel.from_dict(data['quantile_model']),
            reference_dim=int(data['reference_dim']),
            adj_ref=float(data['adj_ref']),
            config=MiscoverageConfig(**data['config']),
            crossings=int(data.get('crossings', 0)),
            floored_sides=int(data.get('floored_sides', 0)),
        )


def calibrate_cqhr(quantile_model: QuantileModel, cal: MultiTargetDataset, config: MiscoverageConfig,
                   reference_dim: ReferenceChoice = 0) -> CqhrPredictor:
    """Steps 3-7: side lengths, interval scores, per-point conversion, row max, inflated quantile."""
    band = quantile_model.predict(cal.x)
    crossings = int(band.crossed.sum())
    if crossings:
        logger.warning("repaired %d crossed quantile pair(s) on the calibration fold", crossings)
    lengths, floored = floor_sides(band.hi - band.lo, "cqhr calibration")
    ref = resolve_reference(reference_dim, lengths)

    e = interval_scores(band.lo, band.hi, cal.y)
    w = (e * (lengths[:, [ref]] / lengths)).max(axis=1)
    adj_ref = inflated_empirical_quantile(w, 1.0 - config.alpha)
    logger.debug("cqhr reference %d adjustment %.6g over %d calibration rows", ref, adj_ref, cal.n)

    return CqhrPredictor(
        quantile_model=quantile_model,
        reference_dim=ref,
        adj_ref=adj_ref,
        config=config,
        crossings=crossings,
        floored_sides=floored,
        scores=ScoreSet(v=np.empty((0, cal.p)), e=e, w=w),
    )


def fit_cqhr(data: MultiTargetDataset, split: SplitPlan, config: MiscoverageConfig,
             feature_map: Optional[FeatureMap] = None, lo_level: Optional[float] = None,
             hi_level: Optional[float] = None, reference_dim: ReferenceChoice = 0) -> CqhrPredictor:
    """
    Fit lower/upper quantile models on the training fold and calibrate on the
    calibration rows (both calibration parts of ``split`` are pooled).
    Default quantile levels put alpha/2 in each tail.
    """
    cal_idx = split.cal_idx
    if split.train_idx.size < 1 or cal_idx.size < 1:
        raise SplitTooSmallError(f"cqhr needs non-empty train and calibration parts, got sizes {split.sizes}")
    lo_level = config.alpha / 2 if lo_level is None else lo_level
    hi_level = 1.0 - config.alpha / 2 if hi_level is None else hi_level
    feature_map = feature_map or FeatureMap.linear(data.d)
    model = fit_quantile_model(data.subset(split.train_idx), feature_map, lo_level, hi_level)
    return calibrate_cqhr(model, data.subset(cal_idx), config, reference_dim)


def predict_cqhr(predictor: CqhrPredictor, x) -> Hyperrectangle:
    return predictor.predict(x)
