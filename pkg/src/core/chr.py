"""
Conformal hyperrectangular regression from a point model.

Two calibration folds: the first fixes an initial interval per dimension
(constant width), the second calibrates one joint adjustment in the units of
a reference dimension, which is then converted back to every side.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..data.schemas import Hyperrectangle, MiscoverageConfig, MultiTargetDataset, ScoreSet, SideRatios, SplitPlan
from .errors import DimensionMismatchError, InvertedIntervalError, SplitTooSmallError
from .features import FeatureMap
from .models import PointModel, fit_least_squares
from .quantiles import inflated_empirical_quantile, inflated_quantiles
from .regions import MIN_VARIABILITY, ReferenceChoice, RegionPredictor, collapse_inverted, floor_sides

logger = logging.getLogger(__name__)

SCORE_ABSOLUTE = "absolute"
SCORE_SIGNED = "signed"


def interval_score(lo: float, hi: float, y: float) -> float:
    """max(lo - y, y - hi): negative iff y is strictly inside [lo, hi]."""
    if lo > hi:
        raise InvertedIntervalError(lo, hi)
    return max(lo - y, y - hi)


def interval_scores(lo: np.ndarray, hi: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.maximum(lo - y, y - hi)


def convert_scores(e: np.ndarray, ratios: np.ndarray, unbounded: np.ndarray) -> np.ndarray:
    """E scores in reference units; unbounded sides never bind, so they map to -inf."""
    with np.errstate(invalid="ignore"):
        return np.where(unbounded, -math.inf, e * ratios)


def _tail_level(initial_level: float, tail: float, alpha: float) -> Optional[float]:
    # at the default level the tail budget is used as given, keeping decimal levels exact
    share = tail if initial_level == 1.0 - alpha else (1.0 - initial_level) * tail / alpha
    return None if share <= 0 else 1.0 - share


@dataclass(frozen=True, eq=False)
class ChrPredictor(RegionPredictor):
    point_model: PointModel
    lo_offsets: np.ndarray   # stage-1 interval is [f - lo_offsets, f + hi_offsets]
    hi_offsets: np.ndarray
    ratios: SideRatios
    adjustments: np.ndarray
    score_kind: str
    config: MiscoverageConfig
    initial_level: float
    floored_sides: int = 0
    scores: Optional[ScoreSet] = field(default=None, compare=False, repr=False)

    kind = "chr"

    @property
    def p(self) -> int:
        return self.adjustments.size

    @property
    def halfwidths(self) -> np.ndarray:
        return 0.5 * (self.lo_offsets + self.hi_offsets)

    def predict_many(self, x) -> Tuple[np.ndarray, np.ndarray]:
        f = np.atleast_2d(self.point_model.predict(np.atleast_2d(x)))
        lo = f - self.lo_offsets - self.adjustments
        hi = f + self.hi_offsets + self.adjustments
        return collapse_inverted(lo, hi)

    def to_dict(self) -> dict:
        return {
            'kind': self.kind,
            'point_model': self.point_model.to_dict(),
            'lo_offsets': self.lo_offsets.tolist(),
            'hi_offsets': self.hi_offsets.tolist(),
            'reference_dim': self.ratios.reference_dim,
            'lengths': self.ratios.lengths.tolist(),
            'adjustments': self.adjustments.tolist(),
            'score_kind': self.score_kind,
            'config': self.config.to_dict(),
            'initial_level': self.initial_level,
            'floored_sides': self.floored_sides,
        }

    @staticmethod
    def from_dict(data: dict) -> "ChrPredictor":
        return ChrPredictor(
            point_model=PointModel.from_dict(data['point_model']),
            lo_offsets=np.array(data['lo_offsets'], dtype=float),
            hi_offsets=np.array(data['hi_offsets'], dtype=float),
            ratios=SideRatios(int(data['reference_dim']), np.array(data['lengths'], dtype=float)),
            adjustments=np.array(data['adjustments'], dtype=float),
            score_kind=data['score_kind'],
            config=MiscoverageConfig(**data['config']),
            initial_level=float(data['initial_level']),
            floored_sides=int(data.get('floored_sides', 0)),
        )


def stage_one_offsets(residuals: np.ndarray, config: MiscoverageConfig, score_kind: str,
                      initial_level: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Initial interval offsets from first-calibration residuals y - f(x).

    Returns (v, lo_offsets, hi_offsets) where v are the stage-1 scores.
    """
    if score_kind == SCORE_ABSOLUTE:
        v = np.abs(residuals)
        q = inflated_quantiles(v, initial_level)
        return v, q, q.copy()
    if score_kind == SCORE_SIGNED:
        lo_level = _tail_level(initial_level, config.alpha_lo, config.alpha)
        hi_level = _tail_level(initial_level, config.alpha_hi, config.alpha)
        p = residuals.shape[1]
        # a tail with no miscoverage budget stays open
        lo = inflated_quantiles(-residuals, lo_level) if lo_level is not None else np.full(p, math.inf)
        hi = inflated_quantiles(residuals, hi_level) if hi_level is not None else np.full(p, math.inf)
        return residuals, lo, hi
    raise ValueError(f"unknown score kind '{score_kind}' (expected '{SCORE_ABSOLUTE}' or '{SCORE_SIGNED}')")


def calibrate_chr(point_model: PointModel, cal1: MultiTargetDataset, cal2: MultiTargetDataset,
                  config: MiscoverageConfig, score_kind: str = SCORE_ABSOLUTE,
                  reference_dim: ReferenceChoice = 0,
                  initial_level: Optional[float] = None) -> ChrPredictor:
    """Steps 3-10: stage-1 intervals on cal1, joint adjustment on cal2."""
    if initial_level is None:
        initial_level = 1.0 - config.alpha
    v, lo_off, hi_off = stage_one_offsets(cal1.y - point_model.predict(cal1.x), config, score_kind, initial_level)

    lengths = lo_off + hi_off
    unbounded = np.isinf(lengths)
    if unbounded.any():
        logger.warning("stage-1 quantile undefined for dimension(s) %s: first calibration fold too small "
                       "for level %.4g, those sides are unbounded", np.flatnonzero(unbounded).tolist(), initial_level)
    lengths, floored = floor_sides(lengths, "chr stage-1")

    # constant ratios make every reference equivalent
    p = lengths.size
    ref = 0 if reference_dim == MIN_VARIABILITY else int(reference_dim)
    if not 0 <= ref < p:
        raise DimensionMismatchError(f"reference_dim {ref} outside [0, {p})")
    if unbounded[ref] and not unbounded.all():
        bounded_ref = int(np.flatnonzero(~unbounded)[0])
        logger.info("reference dimension %d is unbounded, using %d", ref, bounded_ref)
        ref = bounded_ref
    ratios = SideRatios(ref, lengths)

    f2 = point_model.predict(cal2.x)
    e = interval_scores(f2 - lo_off, f2 + hi_off, cal2.y)
    w = convert_scores(e, ratios.ratios(), unbounded).max(axis=1)
    if unbounded.all():
        # no side binds: the region is the whole space
        adj_ref = 0.0
    else:
        adj_ref = inflated_empirical_quantile(w, 1.0 - config.alpha)

    # an unbounded side may still have one finite end; open it too
    with np.errstate(invalid="ignore"):
        adjustments = np.where(unbounded, math.inf, adj_ref * (lengths / lengths[ref]))
    logger.debug("chr (%s) reference %d adjustment %.6g", score_kind, ref, adj_ref)

    return ChrPredictor(
        point_model=point_model,
        lo_offsets=lo_off,
        hi_offsets=hi_off,
        ratios=ratios,
        adjustments=np.asarray(adjustments, dtype=float),
        score_kind=score_kind,
        config=config,
        initial_level=float(initial_level),
        floored_sides=floored,
        scores=ScoreSet(v=v, e=e, w=w),
    )


def fit_chr(data: MultiTargetDataset, split: SplitPlan, config: MiscoverageConfig,
            score_kind: str = SCORE_ABSOLUTE, feature_map: Optional[FeatureMap] = None,
            reference_dim: ReferenceChoice = 0, initial_level: Optional[float] = None) -> ChrPredictor:
    """Fit the point model on the training fold, then calibrate on the two calibration folds."""
    if min(split.sizes) < 1:
        raise SplitTooSmallError(f"chr needs non-empty train, cal1 and cal2, got sizes {split.sizes}")
    feature_map = feature_map or FeatureMap.linear(data.d)
    model = fit_least_squares(data.subset(split.train_idx), feature_map)
    return calibrate_chr(model, data.subset(split.cal1_idx), data.subset(split.cal2_idx),
                         config, score_kind, reference_dim, initial_level)


def predict_chr(predictor: ChrPredictor, x) -> Hyperrectangle:
    return predictor.predict(x)
