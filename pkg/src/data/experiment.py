"""Experiment and method configuration documents (JSON or TOML)."""
import json
import os
from typing import Literal, Optional, Union

import toml
from pydantic import BaseModel, Field, ValidationError, model_validator

from ..config import Config
from ..core.errors import DataFormatError
from ..core.simgen import BUILTINS, CORRELATIONS, ScenarioSpec, builtin_scenario
from .schemas import MiscoverageConfig

MethodName = Literal["chr-abs", "chr-signed", "cqhr", "absmax", "bonf-cqr", "bonf-naive"]
METHODS = ("chr-abs", "chr-signed", "cqhr", "absmax", "bonf-cqr", "bonf-naive")


class MethodConfig(BaseModel):
    method: MethodName = "cqhr"
    alpha: float = Field(default=Config.ALPHA, gt=0.0, lt=1.0)
    alpha_lo: Optional[float] = None
    alpha_hi: Optional[float] = None
    reference_dim: Union[int, Literal["min-variability"]] = 0
    initial_level: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    lo_level: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    hi_level: Optional[float] = Field(default=None, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check(self):
        self.miscoverage()
        if isinstance(self.reference_dim, int) and self.reference_dim < 0:
            raise ValueError(f"reference_dim must be >= 0, got {self.reference_dim}")
        if self.lo_level is not None and self.hi_level is not None and not self.lo_level < self.hi_level:
            raise ValueError(f"lo_level {self.lo_level} must be below hi_level {self.hi_level}")
        return self

    @property
    def two_stage(self) -> bool:
        return self.method in ("chr-abs", "chr-signed")

    def miscoverage(self) -> MiscoverageConfig:
        return MiscoverageConfig(self.alpha, self.alpha_lo, self.alpha_hi)


class ScenarioChoice(BaseModel):
    """Either a built-in scenario (plus its variant knobs) or a full scenario document."""
    builtin: Optional[str] = None
    correlation: Optional[str] = None
    heteroskedastic: bool = False
    spec: Optional[ScenarioSpec] = None

    @model_validator(mode="after")
    def _check(self):
        if (self.builtin is None) == (self.spec is None):
            raise ValueError("give exactly one of 'builtin' or 'spec'")
        if self.builtin is not None and self.builtin not in BUILTINS:
            raise ValueError(f"unknown builtin scenario '{self.builtin}'")
        if self.correlation is not None and self.correlation not in CORRELATIONS:
            raise ValueError(f"unknown correlation '{self.correlation}'")
        return self

    def resolve(self, seed: int, n_test: int) -> ScenarioSpec:
        if self.spec is not None:
            data = self.spec.model_dump()
            data.update(seed=seed, n_test=n_test)
            return ScenarioSpec.model_validate(data)
        return builtin_scenario(self.builtin, self.correlation, self.heteroskedastic, seed=seed, n_test=n_test)


class ExperimentConfig(BaseModel):
    schema_version: int = Config.EXPERIMENT_SCHEMA_VERSION
    scenario: ScenarioChoice
    method: MethodConfig = Field(default_factory=MethodConfig)
    replicates: int = Field(default=Config.DESK_REPLICATES, ge=1)
    n_test: int = Field(default=Config.DESK_N_TEST, ge=1)
    seed: int = 0
    jobs: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_version(self):
        if self.schema_version != Config.EXPERIMENT_SCHEMA_VERSION:
            raise ValueError(f"unsupported experiment schema_version {self.schema_version} "
                             f"(expected {Config.EXPERIMENT_SCHEMA_VERSION})")
        return self

    def scenario_spec(self) -> ScenarioSpec:
        return self.scenario.resolve(self.seed, self.n_test)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json", exclude_none=True)


def _is_toml(path: str) -> bool:
    return os.path.splitext(path)[1].lower() == ".toml"


def load_experiment(path: str) -> ExperimentConfig:
    """Parse and validate an experiment file; the extension picks JSON or TOML."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = toml.load(f) if _is_toml(path) else json.load(f)
    except (OSError, ValueError, toml.TomlDecodeError) as e:
        raise DataFormatError(f"cannot read experiment config {path}: {e}") from e
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise DataFormatError(f"invalid experiment config {path}: {e}") from e


def dump_experiment(config: ExperimentConfig, path: str) -> None:
    data = config.to_dict()
    with open(path, 'w', encoding='utf-8') as f:
        if _is_toml(path):
            toml.dump(data, f)
        else:
            json.dump(data, f, indent=2, sort_keys=True)
