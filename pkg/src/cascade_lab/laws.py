"""Unit-mean weight laws with closed-form moments.

Each law maps a uniform variate to a draw through a fixed transform (the
``code``/``param`` pair understood by the kernels), so sampling is a pure
function of the stream position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from . import _backend
from .errors import InputError
from .moments import Domain, classify_domain
from .rng import CounterRNG

DIRAC, TWO_POINT, UNIFORM, LOGNORMAL, POOL = range(5)


@dataclass(frozen=True)
class WeightLaw:
    code: ClassVar[int]
    name: ClassVar[str]

    @property
    def param(self) -> float:
        return 0.0

    def moment(self, p: int) -> float:
        if p not in (1, 2, 3):
            raise InputError(f"moment order {p} unsupported (1, 2 or 3)")
        return self._moment(p)

    def _moment(self, p):
        raise NotImplementedError

    def spec(self) -> dict:
        """Config-file form, e.g. ``{'law': 'twopoint', 'a': 0.7}``."""
        return {"law": self.name}


@dataclass(frozen=True)
class Dirac1(WeightLaw):
    code: ClassVar[int] = DIRAC
    name: ClassVar[str] = "dirac"

    def _moment(self, p):
        return 1.0


@dataclass(frozen=True)
class TwoPoint(WeightLaw):
    """Values ``1 - a`` and ``1 + a`` with probability 1/2 each."""

    a: float
    code: ClassVar[int] = TWO_POINT
    name: ClassVar[str] = "twopoint"

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise InputError(f"two-point half-width a must lie in (0, 1), got {self.a}")

    @property
    def param(self):
        return self.a

    def _moment(self, p):
        a2 = self.a * self.a
        return (1.0, 1.0 + a2, 1.0 + 3.0 * a2)[p - 1]

    def spec(self):
        return {"law": self.name, "a": self.a}


@dataclass(frozen=True)
class Uniform(WeightLaw):
    """Uniform on ``[1 - c, 1 + c]``."""

    c: float
    code: ClassVar[int] = UNIFORM
    name: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not 0.0 < self.c <= 1.0:
            raise InputError(f"uniform half-width c must lie in (0, 1], got {self.c}")

    @property
    def param(self):
        return self.c

    def _moment(self, p):
        c2 = self.c * self.c
        return (1.0, 1.0 + c2 / 3.0, 1.0 + c2)[p - 1]

    def spec(self):
        return {"law": self.name, "c": self.c}


@dataclass(frozen=True)
class LogNormal(WeightLaw):
    """``exp(rho * G - rho**2 / 2)`` with G standard normal."""

    rho: float
    code: ClassVar[int] = LOGNORMAL
    name: ClassVar[str] = "lognormal"

    def __post_init__(self):
        if not self.rho > 0.0:
            raise InputError(f"lognormal rho must be positive, got {self.rho}")

    @property
    def param(self):
        return self.rho

    def _moment(self, p):
        # E exp(p rho G - p rho^2/2) = exp(p(p-1) rho^2 / 2)
        return math.exp(p * (p - 1) * self.rho**2 / 2.0)

    def spec(self):
        return {"law": self.name, "rho": self.rho}


_PARAMS = {"dirac": (Dirac1, None), "twopoint": (TwoPoint, "a"),
           "uniform": (Uniform, "c"), "lognormal": (LogNormal, "rho")}


def law_from_spec(spec: dict) -> WeightLaw:
    """Build a law from config keys: ``law = twopoint`` plus ``a = 0.7`` etc."""
    name = str(spec.get("law", "")).strip().lower()
    if name not in _PARAMS:
        raise InputError(f"unknown law {name!r}; choose from {sorted(_PARAMS)}")
    cls, key = _PARAMS[name]
    if key is None:
        return cls()
    if spec.get(key) is None:
        raise InputError(f"law {name} needs parameter {key}")
    try:
        value = float(spec[key])
    except (TypeError, ValueError):
        raise InputError(f"parameter {key} must be a number, got {spec[key]!r}") from None
    return cls(value)


def sample(law: WeightLaw, rng: CounterRNG, count: int) -> np.ndarray:
    """Next *count* i.i.d. draws from the stream."""
    if count < 1:
        raise InputError("count must be >= 1")
    keys = np.array([rng.key], dtype=np.uint64)
    out = _backend.kernels().law_block(keys, rng.position, count, law.code, law.param, None)[0]
    rng.position += count
    return out


def validate_for_cascade(law: WeightLaw, b: int) -> Domain:
    return classify_domain(b, law.moment(1), law.moment(2), law.moment(3))
