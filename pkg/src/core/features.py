"""
Covariate feature maps.

A map is a list of named terms. Each term is ``1`` or a product of factors
joined by ``*``; a factor is ``xk``, ``xk^2``, ``|xk|`` or ``sqrt|xk|`` with k
1-based. The same vocabulary describes the mean/shift/scale structure of the
simulation scenarios, so every scenario's correctly specified basis is a
FeatureMap.
"""
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatchError

_FACTOR = re.compile(r"^(?:x(?P<pow>\d+)\^2|x(?P<lin>\d+)|\|x(?P<abs>\d+)\||sqrt\|x(?P<sqrt>\d+)\|)$")


def _parse_factor(token: str) -> Tuple[int, Callable[[np.ndarray], np.ndarray]]:
    m = _FACTOR.match(token.strip())
    if not m:
        raise ValueError(f"unknown feature factor '{token}'")
    if m.group("lin"):
        return int(m.group("lin")), lambda c: c
    if m.group("pow"):
        return int(m.group("pow")), lambda c: c * c
    if m.group("abs"):
        return int(m.group("abs")), np.abs
    return int(m.group("sqrt")), lambda c: np.sqrt(np.abs(c))


def parse_term(term: str) -> List[Tuple[int, Callable[[np.ndarray], np.ndarray]]]:
    term = term.replace(" ", "")
    if term == "1":
        return []
    factors = [_parse_factor(tok) for tok in term.split("*")]
    for k, _ in factors:
        if k < 1:
            raise ValueError(f"covariate index in '{term}' must be >= 1")
    return factors


def evaluate_term(term: str, x: np.ndarray) -> np.ndarray:
    """Value of one term for every row of ``x`` (n x d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.ones(x.shape[0])
    for k, fn in parse_term(term):
        if k > x.shape[1]:
            raise DimensionMismatchError(f"term '{term}' needs x{k}, covariates have d={x.shape[1]}")
        out = out * fn(x[:, k - 1])
    return out


def evaluate_terms(coefs: Dict[str, float], x: np.ndarray) -> np.ndarray:
    """Sum of coef * term over a {term: coef} mapping."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(x.shape[0])
    for term, coef in coefs.items():
        out = out + float(coef) * evaluate_term(term, x)
    return out


def max_covariate_index(terms: Sequence[str]) -> int:
    return max([k for t in terms for k, _ in parse_term(t)] or [0])


@dataclass(frozen=True)
class FeatureMap:
    name: str
    terms: Tuple[str, ...]

    def __post_init__(self):
        terms = tuple(t.replace(" ", "") for t in self.terms)
        if not terms or terms[0] != "1":
            raise ValueError("feature maps start with the constant term '1'")
        if len(set(terms)) != len(terms):
            raise ValueError(f"duplicate terms in feature map '{self.name}'")
        for t in terms:
            parse_term(t)
        object.__setattr__(self, "terms", terms)

    @property
    def m(self) -> int:
        return len(self.terms)

    @property
    def d_required(self) -> int:
        return max_covariate_index(self.terms)

    def expand(self, x) -> np.ndarray:
        """Feature matrix (n x m) for covariates (n x d); a 1-D x is one row."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] < self.d_required:
            raise DimensionMismatchError(
                f"feature map '{self.name}' needs {self.d_required} covariates, got {x.shape[1]}")
        return np.column_stack([evaluate_term(t, x) for t in self.terms])

    @classmethod
    def linear(cls, d: int) -> "FeatureMap":
        return cls("linear", ("1",) + tuple(f"x{k}" for k in range(1, d + 1)))

    @classmethod
    def from_terms(cls, name: str, terms: Sequence[str]) -> "FeatureMap":
        terms = [t.replace(" ", "") for t in terms if t.replace(" ", "") != "1"]
        return cls(name, ("1",) + tuple(dict.fromkeys(terms)))

    def to_dict(self):
        return {'name': self.name, 'terms': list(self.terms)}

    @staticmethod
    def from_dict(data: dict) -> "FeatureMap":
        return FeatureMap(name=data['name'], terms=tuple(data['terms']))
