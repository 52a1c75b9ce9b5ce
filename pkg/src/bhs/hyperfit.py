"""Fitting the global prior variance and the local shrinkage factor.

The global variance is estimated by maximizing the marginal likelihood of a
curated set of historical estimates, each treated as ``N(0, tau + gamma_k)``.
The local factor ``lambda`` has an Inverse-Gamma full conditional; the
production path fixes it at the conditional mode with ``a = b = 1``, and
:func:`gibbs_lambda_oracle` samples the full two-block chain as a reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import rng as _rng
from .errors import InvalidInputError
from .models import ExperimentSummary, HyperParameters

TAU_FLOOR = 1e-12


@dataclass(frozen=True)
class CuratedObservation:
    eta_hat: float
    gamma: float
    id: str = ""

    def __post_init__(self):
        if not math.isfinite(self.eta_hat):
            raise InvalidInputError(f"eta_hat must be finite, got {self.eta_hat!r}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise InvalidInputError(f"gamma must be positive, got {self.gamma!r}")


@dataclass(frozen=True)
class InverseGammaParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise InvalidInputError(
                f"Inverse-Gamma needs shape, scale > 0, got ({self.shape}, {self.scale})"
            )

    def mode(self) -> float:
        return self.scale / (self.shape + 1.0)

    def mean(self) -> float:
        if self.shape <= 1:
            return math.inf
        return self.scale / (self.shape - 1.0)

    def variance(self) -> float:
        if self.shape <= 2:
            return math.inf
        return self.scale**2 / ((self.shape - 1.0) ** 2 * (self.shape - 2.0))


def _as_arrays(obs: Sequence[CuratedObservation]) -> tuple[np.ndarray, np.ndarray]:
    # canonical order makes the floating-point sum, and hence the fitted
    # value, independent of how the observations were listed
    pairs = sorted((o.eta_hat, o.gamma) for o in obs)
    eta = np.array([p[0] for p in pairs], dtype=float)
    gamma = np.array([p[1] for p in pairs], dtype=float)
    return eta, gamma


def marginal_loglik(tau: float, eta_hat: np.ndarray, gamma: np.ndarray) -> float:
    """Sum over k of ``log N(eta_hat_k | 0, tau + gamma_k)``."""
    v = tau + gamma
    return float(-0.5 * np.sum(np.log(2 * np.pi * v) + eta_hat**2 / v))


def _score(tau: float, eta_hat: np.ndarray, gamma: np.ndarray) -> float:
    v = tau + gamma
    return float(0.5 * np.sum(eta_hat**2 / v**2 - 1.0 / v))


def fit_tau(
    obs: Sequence[CuratedObservation],
    tau_max: float | None = None,
    *,
    grid_points: int = 64,
) -> float:
    """Maximum marginal-likelihood estimate of the global prior variance.

    The search runs over ``[0, tau_max]``. A coarse log-spaced scan locates the
    best bracket, Brent's bounded method refines it, and both endpoints are
    compared at the end so a boundary optimum (including ``tau = 0``) is
    returned exactly.
    """
    if len(obs) == 0:
        raise InvalidInputError("fit_tau needs at least one curated observation")
    eta, gamma = _as_arrays(obs)
    if tau_max is None:
        tau_max = 10.0 * float(np.max(eta**2)) + 1.0
    if not (tau_max > 0 and math.isfinite(tau_max)):
        raise InvalidInputError(f"tau_max must be positive, got {tau_max!r}")

    def objective(t: float) -> float:
        return -marginal_loglik(t, eta, gamma)

    # the sum of unimodal terms can have several local optima in the
    # heteroskedastic case, so bracket before refining
    scale = float(np.min(gamma))
    grid = np.unique(
        np.concatenate(
            [[0.0], np.geomspace(min(scale, tau_max) * 1e-6, tau_max, grid_points), [tau_max]]
        )
    )
    values = np.array([objective(t) for t in grid])
    k = int(np.argmin(values))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]

    xatol = 1e-10 * (1.0 + tau_max)
    candidates = [0.0, tau_max, float(grid[k])]
    if hi > lo:
        res = minimize_scalar(
            objective, bounds=(lo, hi), method="bounded", options={"xatol": xatol, "maxiter": 500}
        )
        refined = float(res.x)
        # Brent on the objective stops near sqrt(eps); a root of the score is sharper
        for a, b in ((max(lo, refined - 1e3 * xatol), min(hi, refined + 1e3 * xatol)), (lo, hi)):
            if _score(a, eta, gamma) > 0 > _score(b, eta, gamma):
                refined = float(brentq(_score, a, b, args=(eta, gamma), xtol=1e-15, rtol=1e-15))
                break
        candidates.append(refined)
    best = min(candidates, key=lambda t: (objective(t), t))
    return float(best)


def lambda_conditional(theta: float, hyper: HyperParameters) -> InverseGammaParams:
    """Full conditional of the local factor given ``theta`` and ``tau``."""
    d = theta - hyper.m0
    return InverseGammaParams(
        shape=(hyper.a + 1.0) / 2.0,
        scale=(d * d + hyper.b * hyper.tau) / (2.0 * hyper.tau),
    )


def lambda_mode(theta_hat: float, tau_star: float, m0: float = 0.0) -> float:
    """Plug-in local factor: the conditional mode at ``a = b = 1``."""
    if not tau_star > 0:
        raise InvalidInputError(f"tau_star must be positive, got {tau_star!r}")
    d = theta_hat - m0
    return (d * d + tau_star) / (4.0 * tau_star)


@dataclass(frozen=True)
class GibbsResult:
    lambda_mean: float
    lambda_mode_estimate: float
    theta_mean: float
    theta_var: float
    lambda_draws: np.ndarray
    theta_draws: np.ndarray


def _kde_mode(draws: np.ndarray, grid_size: int = 4096, max_points: int = 20000) -> float:
    """Mode of a positive, heavy-tailed sample.

    The density is smoothed on the log scale, where the tails are light, and
    mapped back with the Jacobian ``1 / x``.
    """
    from scipy.stats import gaussian_kde

    logs = np.log(draws[:max_points])
    kde = gaussian_kde(logs)
    lo, hi = np.quantile(logs, [0.001, 0.999])
    grid = np.linspace(lo, hi, grid_size)
    return float(np.exp(grid[int(np.argmax(kde(grid) * np.exp(-grid)))]))


def gibbs_lambda_oracle(
    exp: ExperimentSummary,
    hyper: HyperParameters,
    iterations: int = 100_000,
    burn_in: int | None = None,
    seed: int = 0,
) -> GibbsResult:
    """Two-block Gibbs sampler over ``(theta, lambda)`` with ``tau`` fixed.

    Starts at ``lambda = 1`` and ``theta = theta_hat``. ``burn_in`` defaults to
    a tenth of ``iterations``.
    """
    if burn_in is None:
        burn_in = iterations // 10
    if iterations <= 0 or burn_in < 0 or iterations <= burn_in:
        raise InvalidInputError(
            f"need iterations > burn_in >= 0, got iterations={iterations}, burn_in={burn_in}"
        )
    gen = _rng.substream(seed, 0, "gibbs")
    shape = (hyper.a + 1.0) / 2.0
    z = gen.standard_normal(iterations)
    g = gen.standard_gamma(shape, iterations)

    s2 = exp.sigma_hat**2
    th_hat, m0, tau, b = exp.theta_hat, hyper.m0, hyper.tau, hyper.b
    lam = 1.0
    theta_draws = np.empty(iterations)
    lambda_draws = np.empty(iterations)
    for t in range(iterations):
        v = lam * tau
        mean = (s2 * m0 + v * th_hat) / (s2 + v)
        theta = mean + math.sqrt(s2 * v / (s2 + v)) * z[t]
        d = theta - m0
        lam = ((d * d + b * tau) / (2.0 * tau)) / g[t]
        theta_draws[t] = theta
        lambda_draws[t] = lam
    lk = lambda_draws[burn_in:]
    tk = theta_draws[burn_in:]
    return GibbsResult(
        lambda_mean=float(np.mean(lk)),
        lambda_mode_estimate=_kde_mode(lk),
        theta_mean=float(np.mean(tk)),
        theta_var=float(np.var(tk, ddof=1)),
        lambda_draws=lk,
        theta_draws=tk,
    )
