import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..core.errors import DataFormatError
from .schemas import MultiTargetDataset

logger = logging.getLogger(__name__)


def parse_targets(spec: str) -> List[str]:
    """``"bp_sys,bp_dia"`` -> ["bp_sys", "bp_dia"]."""
    targets = [t.strip() for t in spec.split(",") if t.strip()]
    if not targets:
        raise DataFormatError("no target columns given")
    if len(set(targets)) != len(targets):
        raise DataFormatError(f"duplicate target columns in '{spec}'")
    return targets


def _read(path: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataFormatError(f"cannot parse {path}: {e}") from e
    if frame.empty:
        raise DataFormatError(f"{path} has no data rows")
    return frame


def _numeric(frame: pd.DataFrame, columns: Sequence[str], path: str) -> np.ndarray:
    """Columns as floats; the first bad cell is reported by 1-based data row."""
    out = np.empty((len(frame), len(columns)))
    for j, col in enumerate(columns):
        values = pd.to_numeric(frame[col], errors='coerce').to_numpy(dtype=float, na_value=np.nan)
        bad = ~np.isfinite(values)
        if bad.any():
            row = int(np.flatnonzero(bad)[0]) + 1
            raw = frame[col].iloc[row - 1]
            what = "missing value" if pd.isna(raw) else f"non-numeric value {raw!r}"
            raise DataFormatError(f"{path}: row {row}, column '{col}': {what}")
        out[:, j] = values
    return out


def load_dataset(path: str, targets: Sequence[str],
                 covariates: Optional[Sequence[str]] = None) -> Tuple[MultiTargetDataset, List[str]]:
    """
    Read a headed CSV. ``targets`` are the response columns; every other
    column is a covariate unless ``covariates`` pins the list and its order.
    Returns the dataset and the covariate column names used.
    """
    frame = _read(path)
    missing = [t for t in targets if t not in frame.columns]
    if missing:
        raise DataFormatError(f"{path}: target column(s) not found: {', '.join(missing)}")
    if covariates is None:
        covariates = [c for c in frame.columns if c not in targets]
    else:
        absent = [c for c in covariates if c not in frame.columns]
        if absent:
            raise DataFormatError(f"{path}: covariate column(s) not found: {', '.join(absent)}")
    covariates = list(covariates)
    if not covariates:
        raise DataFormatError(f"{path}: no covariate columns besides the targets")
    x = _numeric(frame, covariates, path)
    y = _numeric(frame, targets, path)
    logger.info("loaded %s: %d rows, %d covariate(s), %d target(s)", path, len(frame), len(covariates), len(targets))
    return MultiTargetDataset(x, y), covariates


def load_covariates(path: str, covariates: Sequence[str]) -> np.ndarray:
    """Covariate matrix for prediction; extra columns (targets included) are ignored."""
    frame = _read(path)
    absent = [c for c in covariates if c not in frame.columns]
    if absent:
        raise DataFormatError(f"{path}: covariate column(s) not found: {', '.join(absent)}")
    return _numeric(frame, covariates, path)


def predictions_frame(lo: np.ndarray, hi: np.ndarray, targets: Sequence[str]) -> pd.DataFrame:
    columns = {}
    for j, name in enumerate(targets):
        columns[f"{name}_lo"] = lo[:, j]
        columns[f"{name}_hi"] = hi[:, j]
    return pd.DataFrame(columns)


def write_predictions(path: str, lo: np.ndarray, hi: np.ndarray, targets: Sequence[str]) -> None:
    predictions_frame(lo, hi, targets).to_csv(path, index=False, float_format="%.17g")
