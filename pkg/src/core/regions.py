import logging
from typing import Tuple, Union

import numpy as np

from ..config import Config
from ..data.schemas import Hyperrectangle
from .errors import DimensionMismatchError

logger = logging.getLogger(__name__)

MIN_VARIABILITY = "min-variability"

ReferenceChoice = Union[int, str]


class RegionPredictor:
    """Shared surface of every fitted method: rectangles for new covariates."""

    kind = "region"

    def predict_many(self, x) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def predict(self, x) -> Hyperrectangle:
        lo, hi = self.predict_many(np.atleast_2d(np.asarray(x, dtype=float)))
        return Hyperrectangle(lo[0], hi[0])

    def count_crossings(self, x) -> int:
        """Quantile-crossing repairs needed to predict at ``x``."""
        return 0

    def to_dict(self) -> dict:
        raise NotImplementedError


def collapse_inverted(lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sides shrunk past zero width become the single point at their midpoint."""
    inverted = lo > hi
    if inverted.any():
        mid = 0.5 * (lo + hi)
        lo = np.where(inverted, mid, lo)
        hi = np.where(inverted, mid, hi)
    return lo, hi


def floor_sides(lengths: np.ndarray, where: str) -> Tuple[np.ndarray, int]:
    """Raise side lengths below ``Config.SIDE_FLOOR`` to the floor; returns the count raised."""
    lengths = np.asarray(lengths, dtype=float)
    low = ~(lengths >= Config.SIDE_FLOOR)
    count = int(np.sum(low & ~np.isnan(lengths)))
    if count:
        logger.warning("%d degenerate side length(s) floored at %g (%s)", count, Config.SIDE_FLOOR, where)
        lengths = np.where(low, Config.SIDE_FLOOR, lengths)
    return lengths, count


def resolve_reference(reference_dim: ReferenceChoice, lengths: np.ndarray) -> int:
    """
    Reference dimension index. ``"min-variability"`` picks the column of
    ``lengths`` (n x p) with the smallest coefficient of variation.
    """
    lengths = np.atleast_2d(lengths)
    p = lengths.shape[1]
    if reference_dim == MIN_VARIABILITY:
        mean = lengths.mean(axis=0)
        cv = lengths.std(axis=0) / mean
        return int(np.argmin(cv))
    ref = int(reference_dim)
    if not 0 <= ref < p:
        raise DimensionMismatchError(f"reference_dim {ref} outside [0, {p})")
    return ref
