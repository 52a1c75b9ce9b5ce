"""Value types shared by the estimation, fitting and serving layers."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidInputError


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise InvalidInputError(f"{name} must be finite, got {value!r}")


def _require_positive(name: str, value: float) -> None:
    _require_finite(name, value)
    if value <= 0:
        raise InvalidInputError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class ExperimentSummary:
    """Sufficient statistics of one experiment."""

    id: str
    theta_hat: float
    sigma_hat: float
    selected: bool | None = None

    def __post_init__(self):
        _require_finite("theta_hat", self.theta_hat)
        _require_positive("sigma_hat", self.sigma_hat)

    @property
    def variance(self) -> float:
        return self.sigma_hat * self.sigma_hat


@dataclass(frozen=True)
class HyperParameters:
    """Prior configuration: mean ``m0``, global variance ``tau`` and the
    Inverse-Gamma hyperparameters ``a``, ``b`` of the local factor."""

    m0: float = 0.0
    tau: float = 1.0
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        _require_finite("m0", self.m0)
        _require_positive("tau", self.tau)
        _require_positive("a", self.a)
        _require_positive("b", self.b)


@dataclass(frozen=True)
class PosteriorSummary:
    """Gaussian posterior for one experiment with its central interval."""

    mean: float
    variance: float
    lambda_used: float
    interval_level: float
    interval_lo: float
    interval_hi: float

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class AggregateEstimate:
    """Posterior of a sum of independent experiment effects."""

    mean: float
    variance: float
    n_experiments: int
    interval_level: float
    interval_lo: float
    interval_hi: float

    @property
    def width(self) -> float:
        return self.interval_hi - self.interval_lo

    def contains(self, value: float) -> bool:
        return self.interval_lo <= value <= self.interval_hi
