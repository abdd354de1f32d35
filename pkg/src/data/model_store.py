"""
Versioned JSON model files.

    {
      "schema_version": 1,
      "method": "cqhr",
      "targets": [...], "covariates": [...],
      "feature_map": {"name": ..., "terms": [...]},
      "config": {MethodConfig},
      "seed": 42, "split_sizes": [n_tr, n_cal1, n_cal2],
      "predictor": {"kind": ..., coefficients, ratios, adjustments}
    }

Unbounded sides are stored as the JSON literal ``Infinity``.
"""
import json
import logging
from dataclasses import dataclass
from typing import Any, Dict, List

from pydantic import BaseModel, ValidationError

from ..config import Config
from ..core.baselines import AbsoluteMaxPredictor, MarginalQuantilePredictor
from ..core.chr import ChrPredictor
from ..core.cqhr import CqhrPredictor
from ..core.errors import DataFormatError
from ..core.features import FeatureMap
from ..core.regions import RegionPredictor
from .experiment import MethodConfig

logger = logging.getLogger(__name__)

_KIND_BY_METHOD = {
    'chr-abs': 'chr',
    'chr-signed': 'chr',
    'cqhr': 'cqhr',
    'absmax': 'absmax',
    'bonf-cqr': 'bonf-cqr',
    'bonf-naive': 'bonf-naive',
}


class ModelFile(BaseModel):
    schema_version: int
    method: str
    targets: List[str]
    covariates: List[str]
    feature_map: Dict[str, Any]
    config: MethodConfig
    seed: int
    split_sizes: List[int]
    predictor: Dict[str, Any]


@dataclass
class FittedModel:
    predictor: RegionPredictor
    config: MethodConfig
    targets: List[str]
    covariates: List[str]
    feature_map: FeatureMap
    seed: int
    split_sizes: List[int]

    def to_dict(self) -> dict:
        return {
            'schema_version': Config.MODEL_SCHEMA_VERSION,
            'method': self.config.method,
            'targets': list(self.targets),
            'covariates': list(self.covariates),
            'feature_map': self.feature_map.to_dict(),
            'config': self.config.model_dump(mode='json'),
            'seed': self.seed,
            'split_sizes': [int(s) for s in self.split_sizes],
            'predictor': self.predictor.to_dict(),
        }


def predictor_from_dict(data: Dict[str, Any]) -> RegionPredictor:
    kind = data.get('kind')
    if kind == 'chr':
        return ChrPredictor.from_dict(data)
    if kind == 'cqhr':
        return CqhrPredictor.from_dict(data)
    if kind == 'absmax':
        return AbsoluteMaxPredictor.from_dict(data)
    if kind in ('bonf-cqr', 'bonf-naive'):
        return MarginalQuantilePredictor.from_dict(data)
    raise DataFormatError(f"unknown predictor kind {kind!r}")


def _model_of(predictor: RegionPredictor):
    return getattr(predictor, 'point_model', None) or getattr(predictor, 'quantile_model')


def model_from_dict(raw: Dict[str, Any]) -> FittedModel:
    try:
        doc = ModelFile.model_validate(raw)
    except ValidationError as e:
        raise DataFormatError(f"invalid model file: {e}") from e
    if doc.schema_version != Config.MODEL_SCHEMA_VERSION:
        raise DataFormatError(f"unsupported model schema_version {doc.schema_version} "
                              f"(expected {Config.MODEL_SCHEMA_VERSION})")
    if doc.method != doc.config.method or _KIND_BY_METHOD[doc.method] != doc.predictor.get('kind'):
        raise DataFormatError(f"model method '{doc.method}' does not match its payload "
                              f"(config '{doc.config.method}', kind {doc.predictor.get('kind')!r})")
    try:
        predictor = predictor_from_dict(doc.predictor)
        feature_map = FeatureMap.from_dict(doc.feature_map)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, DataFormatError):
            raise
        raise DataFormatError(f"corrupt predictor payload: {e}") from e
    model = _model_of(predictor)
    if model.p != len(doc.targets) or model.d != len(doc.covariates):
        raise DataFormatError(f"model has {model.p} target(s) / {model.d} covariate(s), header lists "
                              f"{len(doc.targets)} / {len(doc.covariates)}")
    if model.feature_map != feature_map:
        raise DataFormatError("feature map in header differs from the predictor's")
    return FittedModel(predictor, doc.config, doc.targets, doc.covariates, feature_map, doc.seed, doc.split_sizes)


def save_model(path: str, model: FittedModel) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(model.to_dict(), f, indent=2, sort_keys=True)
    logger.info("saved %s model to %s", model.config.method, path)


def load_model(path: str) -> FittedModel:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = json.load(f)
    except (OSError, ValueError) as e:
        raise DataFormatError(f"cannot read model file {path}: {e}") from e
    if not isinstance(raw, dict):
        raise DataFormatError(f"{path}: model file must hold a JSON object")
    return model_from_dict(raw)
