"""Posterior predictive checks and replication-pair evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from . import rng as _rng
from .errors import ConfigurationError, InvalidInputError
from .estimators import (
    DEFAULT_LEVEL,
    ESTIMATORS,
    require_closed_form,
    shrink_arrays,
    summaries_to_arrays,
)
from .models import ExperimentSummary, HyperParameters
from .simlab import SIGMA_HAT_FLOOR, ScenarioConfig, generate_scenario


@dataclass(frozen=True)
class CheckReport:
    statistic_name: str
    observed: float
    tail_area_p: float
    n_replicates: int

    def to_dict(self) -> dict:
        return {
            "statistic_name": self.statistic_name,
            "observed": self.observed,
            "tail_area_p": self.tail_area_p,
            "n_replicates": self.n_replicates,
        }


@dataclass(frozen=True)
class ReplicationPair:
    original: ExperimentSummary
    replication: ExperimentSummary

    @property
    def id(self) -> str:
        return self.original.id


def _sample_sd(x: np.ndarray, axis=-1):
    return np.std(x, axis=axis, ddof=1)


STATISTICS: dict[str, Callable[..., np.ndarray]] = {
    "mean": lambda x, axis=-1: np.mean(x, axis=axis),
    "max": lambda x, axis=-1: np.max(x, axis=axis),
    "sd": _sample_sd,
}

Statistic = Literal["mean", "max", "sd"] | Callable[[np.ndarray], float]


def posterior_predictive_replicate(
    exps: Sequence[ExperimentSummary],
    hyper: HyperParameters,
    estimator: Literal["global", "hybrid"] = "global",
    n_replicates: int = 1000,
    seed: int = 0,
    level: float = DEFAULT_LEVEL,
) -> np.ndarray:
    """Replicated estimate collections, one row per replicate.

    For every replicate and experiment, ``theta`` is drawn from the fitted
    posterior and then ``theta_hat_rep ~ N(theta, sigma_hat^2)``. Each replicate
    row has its own substream, so rows do not depend on ``n_replicates``.
    """
    if len(exps) == 0:
        raise InvalidInputError("need at least one experiment")
    if n_replicates <= 0:
        raise InvalidInputError("n_replicates must be positive")
    if estimator not in ("global", "hybrid"):
        raise InvalidInputError(f"predictive checks need a Bayesian estimator, got {estimator!r}")
    if estimator == "hybrid":
        require_closed_form(hyper)
    theta_hat, sigma_hat = summaries_to_arrays(exps)
    post = shrink_arrays(theta_hat, sigma_hat, hyper.m0, hyper.tau, estimator, level)
    post_sd = np.sqrt(post.variance)
    n = theta_hat.size
    out = np.empty((n_replicates, n))
    for r in range(n_replicates):
        g = _rng.substream(seed, r, "replicate")
        z = g.standard_normal((2, n))
        theta = post.mean + post_sd * z[0]
        out[r] = theta + sigma_hat * z[1]
    return out


def _resolve(statistic: Statistic) -> tuple[str, Callable]:
    if callable(statistic):
        name = getattr(statistic, "__name__", "custom")

        def fn(x, axis=-1):
            return np.apply_along_axis(statistic, axis, x)

        return name, fn
    if statistic not in STATISTICS:
        raise ConfigurationError(
            f"unknown statistic {statistic!r}; choose from {sorted(STATISTICS)} or pass a callable"
        )
    return statistic, STATISTICS[statistic]


def tail_area_probability(
    observed: Sequence[ExperimentSummary] | np.ndarray,
    replicates: np.ndarray,
    statistic: Statistic = "mean",
) -> CheckReport:
    """Fraction of replicates whose statistic is at least the observed one.

    Ties count toward the tail.
    """
    name, fn = _resolve(statistic)
    if isinstance(observed, np.ndarray):
        obs = np.asarray(observed, dtype=float)
    else:
        obs = np.array([e.theta_hat for e in observed], dtype=float)
    reps = np.atleast_2d(np.asarray(replicates, dtype=float))
    if reps.shape[1] != obs.size:
        raise InvalidInputError(
            f"replicates have {reps.shape[1]} experiments, observed has {obs.size}"
        )
    t_obs = float(fn(obs[None, :], axis=1)[0])
    t_rep = np.asarray(fn(reps, axis=1), dtype=float)
    p = float(np.count_nonzero(t_rep >= t_obs)) / t_rep.size
    return CheckReport(statistic_name=name, observed=t_obs, tail_area_p=p, n_replicates=int(t_rep.size))


def predictive_check(
    exps: Sequence[ExperimentSummary],
    hyper: HyperParameters,
    estimator: Literal["global", "hybrid"] = "global",
    statistics: Sequence[Statistic] = ("mean", "max", "sd"),
    n_replicates: int = 1000,
    seed: int = 0,
) -> list[CheckReport]:
    reps = posterior_predictive_replicate(exps, hyper, estimator, n_replicates, seed)
    return [tail_area_probability(exps, reps, s) for s in statistics]


def interval_hit_rate(truth: Sequence[float], lo: Sequence[float], hi: Sequence[float]) -> float:
    """Coverage as a predictive-check comparison: ``g`` is the indicator that
    the reference value falls inside the interval."""
    hits = 0
    n = 0
    for t, a, b in zip(truth, lo, hi):
        n += 1
        if a <= t <= b:
            hits += 1
    if n == 0:
        raise InvalidInputError("no intervals to score")
    return hits / n


def evaluate_replication_pairs(
    pairs: Sequence[ReplicationPair], hyper: HyperParameters
) -> dict[str, float]:
    """Mean absolute error of each estimator against the replication's
    face-value estimate."""
    if len(pairs) == 0:
        raise InvalidInputError("need at least one replication pair")
    require_closed_form(hyper)
    theta_hat, sigma_hat = summaries_to_arrays([p.original for p in pairs])
    target = np.array([p.replication.theta_hat for p in pairs], dtype=float)
    out = {}
    for name in ESTIMATORS:
        est = shrink_arrays(theta_hat, sigma_hat, hyper.m0, hyper.tau, name)
        out[name] = float(np.mean(np.abs(est.mean - target)))
    return out


def synthetic_replication_pairs(cfg: ScenarioConfig, n_pairs: int) -> list[ReplicationPair]:
    """Selected experiments from ``cfg`` paired with fresh re-runs.

    The scenario is simulated with ``cfg.n_experiments`` records, grown by
    doubling until at least ``n_pairs`` are selected; the first ``n_pairs``
    selected records become originals. Each replication redraws the standard
    error and the estimate around the same true effect.
    """
    if n_pairs <= 0:
        raise InvalidInputError("n_pairs must be positive")
    if cfg.family == "hidden_selection":
        raise ConfigurationError("replication studies use single-metric families")
    n = cfg.n_experiments
    while True:
        records = generate_scenario(cfg.replace(n_experiments=n))
        idx = np.flatnonzero(records.selected)
        if idx.size >= n_pairs or n > 10**8:
            break
        n *= 2
    if idx.size < n_pairs:
        raise InvalidInputError("selection rate too low to collect the requested pairs")
    idx = idx[:n_pairs]
    g = _rng.substream(cfg.seed, 0, "replication")
    z = g.standard_normal((2, n_pairs))
    theta = records.theta_true[idx]
    if cfg.kappa == 0:
        rep_sigma = np.full(n_pairs, cfg.sigma)
    else:
        rep_sigma = np.maximum(cfg.sigma + cfg.kappa * z[0], SIGMA_HAT_FLOOR * cfg.sigma)
    rep_hat = theta + rep_sigma * z[1]
    pairs = []
    for j, i in enumerate(idx):
        pairs.append(
            ReplicationPair(
                original=ExperimentSummary(
                    f"e{i}", float(records.theta_hat[i]), float(records.sigma_hat[i]), True
                ),
                replication=ExperimentSummary(f"e{i}", float(rep_hat[j]), float(rep_sigma[j])),
            )
        )
    return pairs
