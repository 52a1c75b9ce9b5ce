"""Simulation laboratory for selection bias under four generator families.

A scenario draws true effects, noisy standard errors and face-value
estimates, applies a one-sided significance filter, and scores the three
estimators on the selected subset.

Families
--------
``correct_prior``
    ``theta ~ N(mu, epsilon)``; the analysis prior usually matches.
``misspecified_mean``
    Same generator, but the analysis prior mean stays at ``analysis_m0``
    while ``mu`` moves.
``heavy_tail``
    ``theta = mu + sqrt(epsilon) * t_nu``.
``hidden_selection``
    Bivariate normal with marginal variance ``epsilon`` and correlation
    ``rho``. Both dimensions must pass the filter; only the second (target)
    dimension is analyzed.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np

from . import rng as _rng
from .errors import ConfigurationError, EmptySelectionError
from .estimators import DEFAULT_LEVEL, ESTIMATORS, EstimateArrays, shrink_arrays

Family = Literal["correct_prior", "misspecified_mean", "heavy_tail", "hidden_selection"]
FAMILIES: tuple[str, ...] = ("correct_prior", "misspecified_mean", "heavy_tail", "hidden_selection")

SELECTION_Z_TWO_SIDED = 1.96
SELECTION_Z_ONE_SIDED = 1.645
SIGMA_HAT_FLOOR = 1e-6

DEFAULT_GRIDS: dict[str, list[float]] = {
    "sigma": [0.25, 0.5, 1.0, 2.0, 4.0],
    "mu": [0.0, 0.5, 1.0, 2.0, 4.0],
    "nu": [3.0, 5.0, 10.0, 30.0],
    "rho": [0.0, 0.2, 0.4, 0.6, 0.8, 0.95],
}

SWEEP_AXES: dict[str, tuple[str, ...]] = {
    "sigma": FAMILIES,
    "mu": ("misspecified_mean",),
    "nu": ("heavy_tail",),
    "rho": ("hidden_selection",),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulation run.

    ``mu`` is a pair for ``hidden_selection`` and a scalar otherwise. ``nu`` is
    set only for ``heavy_tail`` and ``rho`` only for ``hidden_selection``.
    """

    family: Family = "correct_prior"
    n_experiments: int = 10_000
    mu: float | tuple[float, float] = 0.0
    epsilon: float = 1.0
    sigma: float = 0.75
    kappa: float = 0.0375
    nu: float | None = None
    rho: float | None = None
    analysis_m0: float = 0.0
    analysis_tau: float = 1.0
    selection_multiplier: float = SELECTION_Z_TWO_SIDED
    interval_level: float = DEFAULT_LEVEL
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.mu, list):
            object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        self.validate()

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if not (isinstance(self.n_experiments, int) and self.n_experiments > 0):
            raise ConfigurationError("n_experiments must be a positive integer")
        for name in ("epsilon", "sigma", "analysis_tau", "selection_multiplier"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"{name} must be positive, got {v!r}")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise ConfigurationError(f"kappa must be nonnegative, got {self.kappa!r}")
        if not 0.0 < self.interval_level < 1.0:
            raise ConfigurationError("interval_level must lie in (0, 1)")
        hidden = self.family == "hidden_selection"
        if hidden != isinstance(self.mu, tuple):
            raise ConfigurationError(
                "mu must be a pair exactly when family is hidden_selection"
            )
        if hidden and len(self.mu) != 2:
            raise ConfigurationError("hidden_selection needs mu of length 2")
        if (self.family == "heavy_tail") != (self.nu is not None):
            raise ConfigurationError("nu must be set exactly when family is heavy_tail")
        if self.nu is not None and not self.nu > 0:
            raise ConfigurationError(f"nu must be positive, got {self.nu!r}")
        if hidden != (self.rho is not None):
            raise ConfigurationError("rho must be set exactly when family is hidden_selection")
        if self.rho is not None and not -1.0 < self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in (-1, 1), got {self.rho!r}")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if isinstance(self.mu, tuple):
            d["mu"] = list(self.mu)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def default_config(family: Family = "correct_prior", **overrides) -> ScenarioConfig:
    """Desk-scale defaults for each family, with the analysis prior set to
    ``N(0, epsilon)``."""
    base: dict = dict(family=family)
    if family == "heavy_tail":
        base["nu"] = 3.0
    if family == "hidden_selection":
        base["mu"] = (0.0, 0.0)
        base["rho"] = 0.5
    base.update(overrides)
    return ScenarioConfig(**base)


@dataclass(frozen=True)
class SimRecord:
    theta_true: float
    theta_hat: float
    sigma_hat: float
    selected: bool
    companion_theta_hat: float | None = None


@dataclass(frozen=True)
class SimRecords:
    """Column-oriented collection of simulated experiments.

    Indexing returns :class:`SimRecord` values; the arrays are what the
    estimation code works on.
    """

    theta_true: np.ndarray
    theta_hat: np.ndarray
    sigma_hat: np.ndarray
    selected: np.ndarray
    companion_theta_true: np.ndarray | None = None
    companion_theta_hat: np.ndarray | None = None
    companion_sigma_hat: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.theta_true.size)

    def __getitem__(self, i: int) -> SimRecord:
        comp = None if self.companion_theta_hat is None else float(self.companion_theta_hat[i])
        return SimRecord(
            theta_true=float(self.theta_true[i]),
            theta_hat=float(self.theta_hat[i]),
            sigma_hat=float(self.sigma_hat[i]),
            selected=bool(self.selected[i]),
            companion_theta_hat=comp,
        )

    def __iter__(self) -> Iterator[SimRecord]:
        return (self[i] for i in range(len(self)))

    def subset(self, mask: np.ndarray) -> "SimRecords":
        return SimRecords(**{
            f.name: (None if getattr(self, f.name) is None else getattr(self, f.name)[mask])
            for f in dataclasses.fields(self)
        })


def apply_selection(theta_hat, sigma_hat, multiplier: float):
    """One-sided significance filter: ``theta_hat > multiplier * sigma_hat``.

    Works elementwise on arrays.
    """
    return np.asarray(theta_hat) > multiplier * np.asarray(sigma_hat)


def _draw_block(cfg: ScenarioConfig, block: int, n: int) -> dict[str, np.ndarray]:
    g_theta = _rng.substream(cfg.seed, block, "theta")
    g_sigma = _rng.substream(cfg.seed, block, "sigma_hat")
    g_hat = _rng.substream(cfg.seed, block, "theta_hat")
    sd = math.sqrt(cfg.epsilon)
    dims = 2 if cfg.family == "hidden_selection" else 1

    if cfg.family in ("correct_prior", "misspecified_mean"):
        theta = cfg.mu + sd * g_theta.standard_normal(n)
    elif cfg.family == "heavy_tail":
        theta = cfg.mu + sd * g_theta.standard_t(cfg.nu, n)
    else:
        z = g_theta.standard_normal((n, 2))
        rho = cfg.rho
        theta = np.empty((n, 2))
        theta[:, 0] = cfg.mu[0] + sd * z[:, 0]
        theta[:, 1] = cfg.mu[1] + sd * (rho * z[:, 0] + math.sqrt(1.0 - rho * rho) * z[:, 1])

    shape = (n, dims) if dims == 2 else n
    if cfg.kappa == 0:
        sigma_hat = np.full(shape, cfg.sigma)
    else:
        sigma_hat = cfg.sigma + cfg.kappa * g_sigma.standard_normal(shape)
        sigma_hat = np.maximum(sigma_hat, SIGMA_HAT_FLOOR * cfg.sigma)
    theta_hat = theta + sigma_hat * g_hat.standard_normal(shape)
    return {"theta": theta, "sigma_hat": sigma_hat, "theta_hat": theta_hat}


def generate_scenario(cfg: ScenarioConfig, workers: int = 1) -> SimRecords:
    """Simulate ``cfg.n_experiments`` experiments and flag the selected ones.

    Output is identical for any ``workers``: each fixed-size block of records
    has its own random substreams.
    """
    cfg.validate()
    spans = list(_rng.blocks(cfg.n_experiments))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: _draw_block(cfg, s[0], s[2] - s[1]), spans))
    else:
        parts = [_draw_block(cfg, b, stop - start) for b, start, stop in spans]
    theta = np.concatenate([p["theta"] for p in parts])
    sigma_hat = np.concatenate([p["sigma_hat"] for p in parts])
    theta_hat = np.concatenate([p["theta_hat"] for p in parts])

    z = cfg.selection_multiplier
    if cfg.family == "hidden_selection":
        selected = apply_selection(theta_hat[:, 0], sigma_hat[:, 0], z) & apply_selection(
            theta_hat[:, 1], sigma_hat[:, 1], z
        )
        return SimRecords(
            theta_true=theta[:, 1].copy(),
            theta_hat=theta_hat[:, 1].copy(),
            sigma_hat=sigma_hat[:, 1].copy(),
            selected=selected,
            companion_theta_true=theta[:, 0].copy(),
            companion_theta_hat=theta_hat[:, 0].copy(),
            companion_sigma_hat=sigma_hat[:, 0].copy(),
        )
    return SimRecords(
        theta_true=theta,
        theta_hat=theta_hat,
        sigma_hat=sigma_hat,
        selected=apply_selection(theta_hat, sigma_hat, z),
    )


def run_estimators(records: SimRecords, cfg: ScenarioConfig) -> dict[str, EstimateArrays]:
    """Point estimates and intervals of all three estimators for every record."""
    return {
        name: shrink_arrays(
            records.theta_hat,
            records.sigma_hat,
            cfg.analysis_m0,
            cfg.analysis_tau,
            name,
            cfg.interval_level,
        )
        for name in ESTIMATORS
    }


@dataclass(frozen=True)
class MetricsReport:
    estimator: str
    mse: float
    bias: float
    bias_se: float
    coverage: float
    n_selected: int
    selection_rate: float


def compute_metrics(
    records: SimRecords,
    estimates: dict[str, EstimateArrays],
    selected_only: bool = True,
) -> dict[str, MetricsReport]:
    """MSE, bias (with its Monte-Carlo standard error) and interval coverage.

    Raises :class:`EmptySelectionError` when ``selected_only`` is set and no
    record was selected.
    """
    n_sel = int(np.count_nonzero(records.selected))
    rate = n_sel / len(records)
    mask = records.selected if selected_only else np.ones(len(records), dtype=bool)
    n = int(np.count_nonzero(mask))
    if n == 0:
        raise EmptySelectionError("no selected experiments; metrics are undefined")
    truth = records.theta_true[mask]
    out = {}
    for name, est in estimates.items():
        delta = est.mean[mask] - truth
        hits = (est.lo[mask] <= truth) & (truth <= est.hi[mask])
        bias = float(np.mean(delta))
        se = float(np.std(delta, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        out[name] = MetricsReport(
            estimator=name,
            mse=float(np.mean(delta * delta)),
            bias=bias,
            bias_se=se,
            coverage=float(np.count_nonzero(hits)) / n,
            n_selected=n_sel,
            selection_rate=rate,
        )
    return out


def simulate(cfg: ScenarioConfig, selected_only: bool = True, workers: int = 1) -> dict[str, MetricsReport]:
    records = generate_scenario(cfg, workers=workers)
    return compute_metrics(records, run_estimators(records, cfg), selected_only)


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    seed: int
    estimator: str
    mse: float | None
    bias: float | None
    bias_se: float | None
    coverage: float | None
    n_selected: int
    selection_rate: float


def _at_axis(base: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    if axis == "sigma":
        # keep the noise-to-scale ratio of the base config
        kappa = base.kappa * value / base.sigma
        return base.replace(sigma=float(value), kappa=kappa)
    if axis == "mu":
        return base.replace(mu=float(value))
    if axis == "nu":
        return base.replace(nu=float(value))
    return base.replace(rho=float(value))


def run_sweep(
    base: ScenarioConfig,
    axis: str,
    grid: Sequence[float],
    seeds: Sequence[int],
    workers: int = 1,
) -> list[SweepRow]:
    """One simulation per (grid value, seed); metrics on the selected subset.

    Rows come out ordered by grid value, then seed, then estimator.
    """
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown sweep axis {axis!r}")
    if base.family not in SWEEP_AXES[axis]:
        raise ConfigurationError(f"axis {axis!r} does not apply to family {base.family!r}")
    if len(grid) == 0:
        raise ConfigurationError("sweep grid is empty")
    if len(seeds) == 0:
        raise ConfigurationError("sweep needs at least one seed")
    rows: list[SweepRow] = []
    for value in grid:
        cfg_v = _at_axis(base, axis, value)
        for seed in seeds:
            cfg = cfg_v.replace(seed=int(seed))
            records = generate_scenario(cfg, workers=workers)
            try:
                metrics = compute_metrics(records, run_estimators(records, cfg))
            except EmptySelectionError:
                rate = 0.0
                rows.extend(
                    SweepRow(axis, float(value), int(seed), name, None, None, None, None, 0, rate)
                    for name in ESTIMATORS
                )
                continue
            for name in ESTIMATORS:
                m = metrics[name]
                rows.append(
                    SweepRow(
                        axis, float(value), int(seed), name,
                        m.mse, m.bias, m.bias_se, m.coverage, m.n_selected, m.selection_rate,
                    )
                )
    return rows


def summarize_sweep(rows: Sequence[SweepRow]) -> dict[tuple[float, str], dict[str, float]]:
    """Average each metric over seeds, keyed by (axis value, estimator)."""
    groups: dict[tuple[float, str], list[SweepRow]] = {}
    for r in rows:
        groups.setdefault((r.value, r.estimator), []).append(r)
    out = {}
    for key, rs in groups.items():
        ok = [r for r in rs if r.mse is not None]
        out[key] = {
            "mse": float(np.mean([r.mse for r in ok])) if ok else math.nan,
            "bias": float(np.mean([r.bias for r in ok])) if ok else math.nan,
            "abs_bias": float(np.mean([abs(r.bias) for r in ok])) if ok else math.nan,
            "coverage": float(np.mean([r.coverage for r in ok])) if ok else math.nan,
            "n_runs": len(ok),
        }
    return out
