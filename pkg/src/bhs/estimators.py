"""Face-value, global-shrinkage and hybrid-shrinkage estimators.

All shrinkage estimators share one Normal-Normal update: an experiment with
estimate ``theta_hat`` and standard error ``sigma_hat`` is combined with a
``N(m0, lambda * tau)`` prior. Global shrinkage fixes ``lambda = 1``; hybrid
shrinkage plugs in the conditional mode of ``lambda`` computed at
``theta_hat``.

The scalar functions return :class:`PosteriorSummary` values and are what the
CLI and HTTP service call. :func:`shrink_arrays` is the vectorized form used
by the simulation code; both go through :func:`_update` so the arithmetic is
shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from statistics import NormalDist
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import DegenerateDenominatorError, InvalidInputError, UnsupportedHyperparameterError
from .hyperfit import lambda_mode
from .models import AggregateEstimate, ExperimentSummary, HyperParameters, PosteriorSummary

DEFAULT_LEVEL = 0.90

Convention = Literal["ratio", "ratio_minus_one"]
Estimator = Literal["face_value", "global", "hybrid"]
ESTIMATORS: tuple[str, ...] = ("face_value", "global", "hybrid")


@lru_cache(maxsize=64)
def z_value(level: float) -> float:
    """Two-sided standard normal quantile for a central interval."""
    if not 0.0 < level < 1.0:
        raise InvalidInputError(f"interval level must lie in (0, 1), got {level!r}")
    return NormalDist().inv_cdf(0.5 + level / 2.0)


@dataclass(frozen=True)
class UnitData:
    """Unit-level outcomes and binary treatment indicators of one experiment."""

    outcomes: np.ndarray
    assignments: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.outcomes, dtype=float)
        z = np.asarray(self.assignments)
        if y.ndim != 1 or z.ndim != 1 or y.shape != z.shape:
            raise InvalidInputError("outcomes and assignments must be 1-D and the same length")
        if y.size < 2:
            raise InvalidInputError("need at least two units")
        if not np.all(np.isin(z, (0, 1))):
            raise InvalidInputError("assignments must be 0 or 1")
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("outcomes must be finite")
        z = z.astype(bool)
        if z.all() or not z.any():
            raise InvalidInputError("need at least one treated and one control unit")
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "assignments", z)

    @property
    def n_units(self) -> int:
        return int(self.outcomes.size)


def ratio_estimate(data: UnitData, convention: Convention = "ratio_minus_one") -> float:
    """Treated mean over control mean, optionally minus one."""
    if convention not in ("ratio", "ratio_minus_one"):
        raise InvalidInputError(f"unknown convention {convention!r}")
    mean_c = float(data.outcomes[~data.assignments].mean())
    if mean_c == 0.0:
        raise DegenerateDenominatorError("control-arm mean is zero")
    ratio = float(data.outcomes[data.assignments].mean()) / mean_c
    return ratio - 1.0 if convention == "ratio_minus_one" else ratio


def face_value_estimate(
    data: UnitData, convention: Convention = "ratio_minus_one", id: str = ""
) -> ExperimentSummary:
    """Ratio of treated to control means with a delta-method standard error.

    The arms are treated as independent samples, so

        SE^2 = s_t^2 / (m_t ybar_c^2) + ybar_t^2 s_c^2 / (m_c ybar_c^4).

    Arms with a single unit contribute zero sample variance. Raises
    :class:`InvalidInputError` when the standard error comes out zero.
    """
    theta_hat = ratio_estimate(data, convention)
    y_t = data.outcomes[data.assignments]
    y_c = data.outcomes[~data.assignments]
    mean_t, mean_c = float(y_t.mean()), float(y_c.mean())
    var_t = float(y_t.var(ddof=1)) if y_t.size > 1 else 0.0
    var_c = float(y_c.var(ddof=1)) if y_c.size > 1 else 0.0
    se2 = var_t / (y_t.size * mean_c**2) + mean_t**2 * var_c / (y_c.size * mean_c**4)
    if not se2 > 0:
        raise InvalidInputError("standard error is zero; outcomes have no variation")
    return ExperimentSummary(id=id, theta_hat=theta_hat, sigma_hat=math.sqrt(se2))


def _update(theta_hat, s2, m0, prior_var):
    # weight on the prior mean; written so theta_hat == m0 returns m0 exactly
    w = s2 / (s2 + prior_var)
    mean = theta_hat + w * (m0 - theta_hat)
    # rounding can leave the convex hull by an ulp
    mean = np.clip(mean, np.minimum(m0, theta_hat), np.maximum(m0, theta_hat))
    variance = w * prior_var
    return mean, variance


def _check_positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise InvalidInputError(f"{name} must be positive and finite, got {value!r}")


def shrinkage_posterior(
    exp: ExperimentSummary,
    hyper: HyperParameters,
    lam: float,
    level: float = DEFAULT_LEVEL,
) -> PosteriorSummary:
    """Posterior of ``theta`` under the prior ``N(m0, lam * tau)``."""
    _check_positive("sigma_hat", exp.sigma_hat)
    _check_positive("lambda", lam)
    _check_positive("tau", hyper.tau)
    z = z_value(level)
    mean, variance = _update(exp.theta_hat, exp.sigma_hat**2, hyper.m0, lam * hyper.tau)
    mean, variance = float(mean), float(variance)
    half = z * math.sqrt(variance)
    return PosteriorSummary(
        mean=mean,
        variance=variance,
        lambda_used=float(lam),
        interval_level=level,
        interval_lo=mean - half,
        interval_hi=mean + half,
    )


def global_posterior(
    exp: ExperimentSummary, hyper: HyperParameters, level: float = DEFAULT_LEVEL
) -> PosteriorSummary:
    return shrinkage_posterior(exp, hyper, 1.0, level)


def require_closed_form(hyper: HyperParameters) -> None:
    if hyper.a != 1.0 or hyper.b != 1.0:
        raise UnsupportedHyperparameterError(
            f"closed-form hybrid shrinkage needs a = b = 1, got a={hyper.a}, b={hyper.b}"
        )


def hybrid_posterior(
    exp: ExperimentSummary, hyper: HyperParameters, level: float = DEFAULT_LEVEL
) -> PosteriorSummary:
    """Posterior with the local factor fixed at its plug-in mode."""
    require_closed_form(hyper)
    lam = lambda_mode(exp.theta_hat, hyper.tau, hyper.m0)
    return shrinkage_posterior(exp, hyper, lam, level)


def face_value_posterior(exp: ExperimentSummary, level: float = DEFAULT_LEVEL) -> PosteriorSummary:
    """The unadjusted estimate dressed as a posterior: ``N(theta_hat, sigma_hat^2)``.

    ``lambda_used`` is NaN since no prior is involved.
    """
    half = z_value(level) * exp.sigma_hat
    return PosteriorSummary(
        mean=exp.theta_hat,
        variance=exp.variance,
        lambda_used=math.nan,
        interval_level=level,
        interval_lo=exp.theta_hat - half,
        interval_hi=exp.theta_hat + half,
    )


def posterior(
    exp: ExperimentSummary,
    hyper: HyperParameters,
    estimator: Estimator,
    level: float = DEFAULT_LEVEL,
) -> PosteriorSummary:
    if estimator == "face_value":
        return face_value_posterior(exp, level)
    if estimator == "global":
        return global_posterior(exp, hyper, level)
    if estimator == "hybrid":
        return hybrid_posterior(exp, hyper, level)
    raise InvalidInputError(f"unknown estimator {estimator!r}")


def shrinkage_gap(
    theta_hat: float, sigma_sq: float, tau_star: float, mode: Literal["hybrid", "global"] = "hybrid"
) -> float:
    """Distance between the shrunk estimate and ``theta_hat`` when ``m0 = 0``.

    The hybrid gap ``4 s |t| / (t^2 + tau + 4 s)`` peaks at
    ``|t| = sqrt(tau + 4 s)`` and then decays to zero; the global gap
    ``|t| s / (tau + s)`` grows without bound.
    """
    _check_positive("sigma_sq", sigma_sq)
    _check_positive("tau_star", tau_star)
    t = abs(theta_hat)
    if mode == "hybrid":
        return 4.0 * sigma_sq * t / (t * t + tau_star + 4.0 * sigma_sq)
    if mode == "global":
        return t * sigma_sq / (tau_star + sigma_sq)
    raise InvalidInputError(f"unknown gap mode {mode!r}")


def aggregate(
    posteriors: Iterable[PosteriorSummary], level: float = DEFAULT_LEVEL
) -> AggregateEstimate:
    """Posterior of the summed effect, assuming additivity and independence."""
    posteriors = list(posteriors)
    if not posteriors:
        raise InvalidInputError("cannot aggregate an empty list of posteriors")
    mean = math.fsum(p.mean for p in posteriors)
    variance = math.fsum(p.variance for p in posteriors)
    half = z_value(level) * math.sqrt(variance)
    return AggregateEstimate(
        mean=mean,
        variance=variance,
        n_experiments=len(posteriors),
        interval_level=level,
        interval_lo=mean - half,
        interval_hi=mean + half,
    )


@dataclass(frozen=True)
class EstimateArrays:
    """Per-record point estimates and intervals for one estimator."""

    mean: np.ndarray
    variance: np.ndarray
    lambda_used: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def shrink_arrays(
    theta_hat: np.ndarray,
    sigma_hat: np.ndarray,
    m0: float,
    tau: float,
    estimator: Estimator,
    level: float = DEFAULT_LEVEL,
) -> EstimateArrays:
    """Vectorized counterpart of :func:`posterior` for summary arrays."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if np.any(sigma_hat <= 0):
        raise InvalidInputError("sigma_hat must be positive")
    z = z_value(level)
    s2 = sigma_hat**2
    if estimator == "face_value":
        mean, variance = theta_hat.copy(), s2
        lam = np.full_like(theta_hat, np.nan)
    else:
        _check_positive("tau", tau)
        if estimator == "global":
            lam = np.ones_like(theta_hat)
        elif estimator == "hybrid":
            lam = lambda_mode(theta_hat, tau, m0)
        else:
            raise InvalidInputError(f"unknown estimator {estimator!r}")
        mean, variance = _update(theta_hat, s2, m0, lam * tau)
    half = z * np.sqrt(variance)
    return EstimateArrays(mean, variance, lam, mean - half, mean + half)


def summaries_to_arrays(exps: Sequence[ExperimentSummary]) -> tuple[np.ndarray, np.ndarray]:
    theta_hat = np.array([e.theta_hat for e in exps], dtype=float)
    sigma_hat = np.array([e.sigma_hat for e in exps], dtype=float)
    return theta_hat, sigma_hat
