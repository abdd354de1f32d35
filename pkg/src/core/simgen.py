"""
Seeded synthetic scenarios for the coverage experiments.

A scenario is a plain document (pydantic model) so it can live in a JSON or
TOML experiment file:

    covariates    one law per column, drawn in order; uniform bounds may
                  name an earlier column ("x2")
    responses     per dimension: mean terms, an independent error law,
                  a post-correlation shift and a scale factor
    correlation   p x p matrix applied as eps @ U (U upper Cholesky factor)

Y_j = mean_j(x) + shift_j(x) + scale_j * (eps @ U)_j
"""
import logging
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from pydantic import BaseModel, Field, field_validator, model_validator

from ..config import Config
from ..data.schemas import MultiTargetDataset
from .errors import CorrelationError
from .features import FeatureMap, evaluate_terms, max_covariate_index, parse_term
from .splitting import ROLE_DATA, ROLE_TEST, make_rng

logger = logging.getLogger(__name__)

Terms = Dict[str, float]


class CovariateLaw(BaseModel):
    family: Literal["exponential", "uniform"]
    rate: Optional[float] = None
    low: Union[float, str, None] = None
    high: Union[float, str, None] = None

    @model_validator(mode="after")
    def _check(self):
        if self.family == "exponential":
            if self.rate is None or not self.rate > 0:
                raise ValueError(f"exponential covariate needs rate > 0, got {self.rate}")
        elif self.low is None or self.high is None:
            raise ValueError("uniform covariate needs low and high")
        elif isinstance(self.low, float) and isinstance(self.high, float) and not self.low < self.high:
            raise ValueError(f"uniform covariate needs low < high, got ({self.low}, {self.high})")
        return self


class ErrorLaw(BaseModel):
    """
    Independent error for one dimension, drawn before correlation.

    ``mean_terms`` moves the normal mean with x; ``shape_terms`` replaces the
    constant gamma shape; ``variance_terms`` multiplies the variance by v(x).
    """
    family: Literal["normal", "gamma"] = "normal"
    mean: float = 0.0
    sd: float = 1.0
    shape: float = 2.0
    rate: float = 1.0
    mean_terms: Terms = Field(default_factory=dict)
    shape_terms: Terms = Field(default_factory=dict)
    variance_terms: Terms = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check(self):
        if self.family == "normal" and not self.sd > 0:
            raise ValueError(f"normal error needs sd > 0, got {self.sd}")
        if self.family == "gamma" and not (self.rate > 0 and (self.shape > 0 or self.shape_terms)):
            raise ValueError(f"gamma error needs rate > 0 and shape > 0, got ({self.shape}, {self.rate})")
        for terms in (self.mean_terms, self.shape_terms, self.variance_terms):
            for t in terms:
                parse_term(t)
        return self


class ResponseSpec(BaseModel):
    mean: Terms
    error: ErrorLaw = Field(default_factory=ErrorLaw)
    shift: Terms = Field(default_factory=dict)
    scale: float = 1.0

    @field_validator("mean", "shift")
    @classmethod
    def _terms(cls, v):
        for t in v:
            parse_term(t)
        return v


class SplitSizes(BaseModel):
    n_tr: int = Field(ge=1)
    n_cal1: int = Field(ge=0)
    n_cal2: int = Field(ge=0)

    @property
    def total(self) -> int:
        return self.n_tr + self.n_cal1 + self.n_cal2

    def as_tuple(self) -> Tuple[int, int, int]:
        return self.n_tr, self.n_cal1, self.n_cal2


class ScenarioSpec(BaseModel):
    name: str
    covariates: List[CovariateLaw]
    responses: List[ResponseSpec]
    correlation: List[List[float]]
    sizes: SplitSizes
    n_test: int = Field(default=Config.DESK_N_TEST, ge=1)
    feature_terms: List[str] = Field(default_factory=list)
    seed: int = 0

    @property
    def d(self) -> int:
        return len(self.covariates)

    @property
    def p(self) -> int:
        return len(self.responses)

    @model_validator(mode="after")
    def _check(self):
        if not self.covariates or not self.responses:
            raise ValueError("scenario needs at least one covariate and one response")
        r = np.asarray(self.correlation, dtype=float)
        if r.shape != (self.p, self.p):
            raise ValueError(f"correlation must be {self.p}x{self.p}, got {r.shape}")
        if not np.allclose(r, r.T, atol=1e-12) or not np.allclose(np.diag(r), 1.0, atol=1e-12):
            raise ValueError("correlation must be symmetric with unit diagonal")
        for k, law in enumerate(self.covariates):
            for bound in (law.low, law.high):
                if isinstance(bound, str):
                    j = _covariate_ref(bound)
                    if not 1 <= j <= k:
                        raise ValueError(f"covariate x{k + 1} bound '{bound}' must name an earlier covariate")
        terms = list(self.feature_terms)
        for resp in self.responses:
            terms += list(resp.mean) + list(resp.shift) + list(resp.error.mean_terms)
            terms += list(resp.error.shape_terms) + list(resp.error.variance_terms)
        if max_covariate_index(terms) > self.d:
            raise ValueError(f"scenario '{self.name}' refers to covariates beyond x{self.d}")
        return self

    def feature_map(self) -> FeatureMap:
        """The scenario's correctly specified basis (linear in x when none is given)."""
        if not self.feature_terms:
            return FeatureMap.linear(self.d)
        return FeatureMap.from_terms(self.name, self.feature_terms)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")

    @staticmethod
    def from_dict(data: dict) -> "ScenarioSpec":
        return ScenarioSpec.model_validate(data)


def _covariate_ref(name: str) -> int:
    if not (name.startswith("x") and name[1:].isdigit()):
        raise ValueError(f"uniform bound '{name}' is neither a number nor a covariate name")
    return int(name[1:])


def correlate_errors(eps: np.ndarray, r) -> np.ndarray:
    """Rows of independent draws mixed by the upper Cholesky factor: eps @ U with U'U = r."""
    r = np.asarray(r, dtype=float)
    try:
        u = scipy.linalg.cholesky(r, lower=False)
    except np.linalg.LinAlgError as e:
        raise CorrelationError(str(e)) from e
    return np.asarray(eps, dtype=float) @ u


def _draw_covariates(laws: List[CovariateLaw], n: int, rng: np.random.Generator) -> np.ndarray:
    x = np.empty((n, len(laws)))
    for k, law in enumerate(laws):
        if law.family == "exponential":
            x[:, k] = rng.exponential(1.0 / law.rate, n)
            continue
        low = x[:, _covariate_ref(law.low) - 1] if isinstance(law.low, str) else np.full(n, law.low)
        high = x[:, _covariate_ref(law.high) - 1] if isinstance(law.high, str) else np.full(n, law.high)
        x[:, k] = low + (high - low) * rng.random(n)
    return x


def _draw_error(law: ErrorLaw, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    if law.family == "normal":
        mean = law.mean + (evaluate_terms(law.mean_terms, x) if law.mean_terms else 0.0)
        eps = mean + law.sd * rng.standard_normal(n)
    else:
        shape = evaluate_terms(law.shape_terms, x) if law.shape_terms else np.full(n, law.shape)
        if np.any(shape < Config.GAMMA_SHAPE_FLOOR):
            shape = np.maximum(shape, Config.GAMMA_SHAPE_FLOOR)
        eps = rng.gamma(shape, 1.0 / law.rate)
    if law.variance_terms:
        eps = eps * np.sqrt(np.abs(evaluate_terms(law.variance_terms, x)))
    return eps


def sample(spec: ScenarioSpec, n: int, rng: np.random.Generator) -> MultiTargetDataset:
    """``n`` rows from the scenario using ``rng``."""
    x = _draw_covariates(spec.covariates, n, rng)
    eps = np.column_stack([_draw_error(resp.error, x, rng) for resp in spec.responses])
    eps = correlate_errors(eps, spec.correlation)
    y = np.empty((n, spec.p))
    for j, resp in enumerate(spec.responses):
        y[:, j] = evaluate_terms(resp.mean, x) + evaluate_terms(resp.shift, x) + resp.scale * eps[:, j]
    return MultiTargetDataset(x, y)


def generate(spec: ScenarioSpec, replicate: int = 0,
             seed: Optional[int] = None) -> Tuple[MultiTargetDataset, MultiTargetDataset]:
    """
    Fitting data (n_tr + n_cal1 + n_cal2 rows) and an independent test set
    of ``spec.n_test`` rows for one replicate. Each (replicate, role) pair
    draws from its own stream, so results do not depend on run order.
    """
    seed = spec.seed if seed is None else seed
    data = sample(spec, spec.sizes.total, make_rng(seed, replicate, ROLE_DATA))
    test = sample(spec, spec.n_test, make_rng(seed, replicate, ROLE_TEST))
    return data, test


# ---------------------------------------------------------------------------
# Built-in scenarios
# ---------------------------------------------------------------------------

CORRELATIONS = {
    "R1": [[1.0, 0.3, 0.6], [0.3, 1.0, 0.5], [0.6, 0.5, 1.0]],
    "R2": [[1.0, 0.8, 0.8], [0.8, 1.0, 0.8], [0.8, 0.8, 1.0]],
    "R3": [[1.0, 0.6, 0.3], [0.6, 1.0, 0.5], [0.3, 0.5, 1.0]],
    "R4": [[1.0, 0.2, 0.2], [0.2, 1.0, 0.2], [0.2, 0.2, 1.0]],
}

BUILTINS = ("setup1", "setup2", "setup3", "setup4", "tendim", "balance-homo", "balance-hetero",
            "balance-normal3", "balance-gamma3")

_SETUP_CORRELATION = {"setup1": "R1", "setup2": "R2", "setup3": "R3", "setup4": "R4"}

_THREE_DIM_COVARIATES = [
    CovariateLaw(family="exponential", rate=0.2),
    CovariateLaw(family="uniform", low=-5.0, high=5.0),
]

_TEN_DIM_COVARIATES = [
    CovariateLaw(family="uniform", low=-2.0, high=5.0),
    CovariateLaw(family="uniform", low=-5.0, high=-1.0),
    CovariateLaw(family="uniform", low=-6.0, high=10.0),
    CovariateLaw(family="uniform", low=0.0, high=4.0),
    CovariateLaw(family="uniform", low="x2", high="x4"),
]

_TEN_DIM_MEANS = [
    {"x1": 2.0},
    {"x1": 1.0, "x1*x2": 1.0},
    {"x2^2": 1.0},
    {"x2*x5": 1.0},
    {"x5^2": 1.0},
    {"x1^2": 1.0},
    {"x4^2": 1.0},
    {"x3^2": 1.0},
    {"x4^2": 1.0},
    {"x1*x2": 1.0},
]

_TEN_DIM_TERMS = ["1", "x1", "x2", "x3", "x4", "x5", "x1*x2", "x2^2", "x2*x5", "x5^2", "x1^2", "x4^2", "x3^2"]


def equicorrelation(p: int, rho: float) -> List[List[float]]:
    r = np.full((p, p), rho)
    np.fill_diagonal(r, 1.0)
    return r.tolist()


def _setup(name: str, correlation: str) -> ScenarioSpec:
    return ScenarioSpec(
        name=name,
        covariates=_THREE_DIM_COVARIATES,
        responses=[
            ResponseSpec(mean={"1": 5.0, "x1": 2.0}, error=ErrorLaw(family="gamma", shape=2.0, rate=0.2)),
            ResponseSpec(mean={"x1": 3.0, "x1*x2": 1.0}, error=ErrorLaw(family="gamma", shape=3.0, rate=0.5)),
            ResponseSpec(mean={"x2^2": 1.0}, error=ErrorLaw(family="normal", mean_terms={"x2": 5.0})),
        ],
        correlation=CORRELATIONS[correlation],
        sizes=SplitSizes(n_tr=500, n_cal1=250, n_cal2=250),
        feature_terms=["1", "x1", "x1*x2", "x2^2", "x2"],
    )


def _tendim() -> ScenarioSpec:
    shifts = [{}, {}, {"x2": 5.0}, {"x5^2": 1.0}, {}, {"x1": -2.0}, {"x4": -1.0}, {}, {}, {}]
    return ScenarioSpec(
        name="tendim",
        covariates=_TEN_DIM_COVARIATES,
        responses=[ResponseSpec(mean=m, shift=s) for m, s in zip(_TEN_DIM_MEANS, shifts)],
        correlation=equicorrelation(10, 0.5),
        sizes=SplitSizes(n_tr=500, n_cal1=250, n_cal2=250),
        feature_terms=_TEN_DIM_TERMS,
    )


def _balance_tendim(heteroskedastic: bool) -> ScenarioSpec:
    variance = {"|x1|": 1.0} if heteroskedastic else {}
    scales = [1.0, 2.0, 3.0, 4.0, 5.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    return ScenarioSpec(
        name="balance-hetero" if heteroskedastic else "balance-homo",
        covariates=_TEN_DIM_COVARIATES,
        responses=[ResponseSpec(mean=m, scale=s, error=ErrorLaw(variance_terms=variance))
                   for m, s in zip(_TEN_DIM_MEANS, scales)],
        correlation=equicorrelation(10, 0.9),
        sizes=SplitSizes(n_tr=500, n_cal1=250, n_cal2=250),
        feature_terms=_TEN_DIM_TERMS + (["sqrt|x1|"] if heteroskedastic else []),
    )


def _balance_normal3(heteroskedastic: bool) -> ScenarioSpec:
    error = ErrorLaw(variance_terms={"|x1|": 1.0} if heteroskedastic else {})
    # (1,2) = -0.8 forces (2,3) negative as well for positive definiteness
    r = [[1.0, -0.8, 0.8], [-0.8, 1.0, -0.8], [0.8, -0.8, 1.0]]
    terms = ["1", "x1", "x1*x2", "x2", "x2^2"] + (["sqrt|x1|"] if heteroskedastic else [])
    return ScenarioSpec(
        name="balance-normal3",
        covariates=_THREE_DIM_COVARIATES,
        responses=[
            ResponseSpec(mean={"1": 5.0, "x1": 2.0}, error=error),
            ResponseSpec(mean={"x1": 3.0, "x1*x2": 1.0}, error=error),
            ResponseSpec(mean={"x2": 5.0, "x2^2": 1.0}, error=error),
        ],
        correlation=r,
        sizes=SplitSizes(n_tr=500, n_cal1=250, n_cal2=250),
        feature_terms=terms,
    )


def _balance_gamma3(correlation: str, heteroskedastic: bool) -> ScenarioSpec:
    if heteroskedastic:
        error = ErrorLaw(family="gamma", rate=0.2, shape_terms={"|x2|": 2.0})
        terms = ["1", "x1", "|x2|", "sqrt|x2|", "x2^2"]
    else:
        error = ErrorLaw(family="gamma", shape=2.0, rate=0.2)
        terms = ["1", "x1"]
    return ScenarioSpec(
        name="balance-gamma3",
        covariates=_THREE_DIM_COVARIATES,
        responses=[ResponseSpec(mean={"x1": 1.0}, error=error) for _ in range(3)],
        correlation=CORRELATIONS[correlation],
        sizes=SplitSizes(n_tr=2000, n_cal1=100, n_cal2=100),
        feature_terms=terms,
    )


def builtin_scenario(name: str, correlation: Optional[str] = None, heteroskedastic: bool = False,
                     seed: int = 0, n_test: Optional[int] = None) -> ScenarioSpec:
    """
    One of the built-in scenarios. ``correlation`` picks R1..R4 for the setup
    family and the gamma balance scenario; ``heteroskedastic`` applies to
    the normal and gamma three-dimension balance scenarios.
    """
    if correlation is not None and correlation not in CORRELATIONS:
        raise ValueError(f"unknown correlation '{correlation}' (expected one of {sorted(CORRELATIONS)})")
    if name in _SETUP_CORRELATION:
        spec = _setup(name, correlation or _SETUP_CORRELATION[name])
    elif name == "tendim":
        spec = _tendim()
    elif name in ("balance-homo", "balance-hetero"):
        spec = _balance_tendim(name == "balance-hetero")
    elif name == "balance-normal3":
        spec = _balance_normal3(heteroskedastic)
    elif name == "balance-gamma3":
        spec = _balance_gamma3(correlation or "R1", heteroskedastic)
    else:
        raise ValueError(f"unknown builtin scenario '{name}' (expected one of {', '.join(BUILTINS)})")
    data = spec.model_dump()
    data['seed'] = int(seed)
    if n_test is not None:
        data['n_test'] = int(n_test)
    return ScenarioSpec.model_validate(data)
