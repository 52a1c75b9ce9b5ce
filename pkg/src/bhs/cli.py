"""Command-line interface.

Every subcommand writes CSV or JSON to stdout (or ``--output``). Output is
assembled in memory and written only after the whole command succeeded, so a
failure never leaves a partial table behind.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import diagnostics, estimators, formats, hyperfit, simlab, store
from .errors import ConfigurationError, EmptySelectionError, InvalidInputError, NotFoundError, StoreConflictError
from .models import HyperParameters

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_RETRY = 75


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _level(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return v


def _store_path(args) -> Path:
    p = args.store or store.default_store_path()
    if p is None:
        raise InvalidInputError(f"no store path: pass --store or set {store.STORE_ENV}")
    return Path(p)


def cmd_fit_tau(args) -> str:
    obs = formats.parse_curated(args.curated)
    tau = hyperfit.fit_tau(obs, args.tau_max)
    if tau < hyperfit.TAU_FLOOR:
        if args.tau_floor is None:
            raise InvalidInputError(
                f"fitted tau is {tau!r} (boundary); pass --tau-floor to store a floored value"
            )
        tau = max(tau, args.tau_floor)
    hyper = HyperParameters(m0=args.m0, tau=tau, a=1.0, b=1.0)
    source = args.source or f"fit-tau {args.curated} (K={len(obs)})"
    store.store_hyperparams(_store_path(args), args.namespace, hyper, source=source)
    return json.dumps(
        {"namespace": args.namespace, "tau": tau, "m0": hyper.m0, "a": hyper.a,
         "b": hyper.b, "n_observations": len(obs)},
        indent=2,
    ) + "\n"


def adjust_rows(exps, hyper, level, which=estimators.ESTIMATORS):
    rows = []
    for e in exps:
        for name in which:
            rows.append((e.id, name, estimators.posterior(e, hyper, name, level)))
    return rows


def cmd_adjust(args) -> str:
    exps = formats.parse_experiments(args.experiments)
    hyper = store.load_hyperparams(_store_path(args), args.namespace)
    return formats.posterior_csv(adjust_rows(exps, hyper, args.level, args.estimators))


def cmd_aggregate(args) -> str:
    rows = formats.parse_posteriors(args.posteriors)
    by_est: dict[str, list] = {}
    for _, est, p in rows:
        by_est.setdefault(est, []).append(p)
    if not by_est:
        raise InvalidInputError("posterior table has no rows")
    out = []
    for est, ps in by_est.items():
        agg = estimators.aggregate(ps, args.level)
        out.append([est, agg.mean, agg.variance, agg.n_experiments, agg.interval_level,
                    agg.interval_lo, agg.interval_hi])
    return formats.table_csv(
        ("estimator", "mean", "variance", "n_experiments", "interval_level",
         "interval_lo", "interval_hi"),
        out,
    )


def _apply_overrides(cfg: simlab.ScenarioConfig, args) -> simlab.ScenarioConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.selection_z is not None:
        changes["selection_multiplier"] = args.selection_z
    if args.level is not None:
        changes["interval_level"] = args.level
    return cfg.replace(**changes) if changes else cfg


METRIC_COLUMNS = ("estimator", "mse", "bias", "bias_se", "coverage", "n_selected", "selection_rate")


def cmd_simulate(args) -> str:
    cfg = _apply_overrides(formats.load_config(args.config), args)
    metrics = simlab.simulate(cfg, selected_only=not args.unconditional, workers=args.workers)
    return formats.table_csv(
        METRIC_COLUMNS,
        ([m.estimator, m.mse, m.bias, m.bias_se, m.coverage, m.n_selected, m.selection_rate]
         for m in metrics.values()),
    )


def cmd_sweep(args) -> str:
    cfg = _apply_overrides(formats.load_config(args.config), args)
    grid = args.grid if args.grid is not None else simlab.DEFAULT_GRIDS[args.axis]
    rows = simlab.run_sweep(cfg, args.axis, grid, args.seeds, workers=args.workers)
    return formats.table_csv(
        ("axis", "value", "seed") + METRIC_COLUMNS,
        ([r.axis, r.value, r.seed, r.estimator, r.mse, r.bias, r.bias_se, r.coverage,
          r.n_selected, r.selection_rate] for r in rows),
    )


def cmd_check(args) -> str:
    exps = formats.parse_experiments(args.experiments)
    hyper = store.load_hyperparams(_store_path(args), args.namespace)
    reports = diagnostics.predictive_check(
        exps, hyper, args.estimator, args.statistics, args.replicates, args.seed or 0
    )
    return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"


def cmd_replicate_eval(args) -> str:
    pairs = formats.parse_pairs(args.pairs)
    hyper = store.load_hyperparams(_store_path(args), args.namespace)
    mae = diagnostics.evaluate_replication_pairs(pairs, hyper)
    return formats.table_csv(("estimator", "mae", "n_pairs"), ([k, v, len(pairs)] for k, v in mae.items()))


def cmd_summarize(args) -> str:
    groups = formats.parse_units(args.units)
    exps = []
    for eid, (ys, zs) in groups.items():
        try:
            data = estimators.UnitData(ys, zs)
            exps.append(estimators.face_value_estimate(data, args.convention, id=eid))
        except InvalidInputError as exc:
            raise InvalidInputError(f"experiment {eid!r}: {exc}") from None
    return formats.experiments_csv(exps)


def cmd_serve(args) -> str:
    from .service import serve

    serve(_store_path(args), args.host, args.port, args.reload_interval)
    return ""


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bhs", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, *, needs_store=False, output=True):
        if needs_store:
            sp.add_argument("--store", help=f"hyperparameter store (default: ${store.STORE_ENV})")
        if output:
            sp.add_argument("-o", "--output", help="write to this file instead of stdout")

    sp = sub.add_parser("fit-tau", help="fit the global prior variance from curated estimates")
    sp.add_argument("curated", help="CSV with columns id,eta_hat,gamma")
    sp.add_argument("--namespace", required=True)
    sp.add_argument("--m0", type=float, default=0.0)
    sp.add_argument("--tau-max", type=float, default=None)
    sp.add_argument("--tau-floor", type=float, default=None,
                    help="store max(tau*, floor) when the fit hits the zero boundary")
    sp.add_argument("--source", default=None)
    common(sp, needs_store=True)
    sp.set_defaults(func=cmd_fit_tau)

    sp = sub.add_parser("adjust", help="posterior table for every experiment and estimator")
    sp.add_argument("experiments", help="CSV with columns id,theta_hat,sigma_hat[,selected]")
    sp.add_argument("--namespace", required=True)
    sp.add_argument("--level", type=_level, default=estimators.DEFAULT_LEVEL)
    sp.add_argument("--estimators", type=lambda s: tuple(s.split(",")),
                    default=estimators.ESTIMATORS)
    common(sp, needs_store=True)
    sp.set_defaults(func=cmd_adjust)

    sp = sub.add_parser("aggregate", help="sum posteriors per estimator")
    sp.add_argument("posteriors", help="posterior CSV produced by `adjust`")
    sp.add_argument("--level", type=_level, default=estimators.DEFAULT_LEVEL)
    common(sp)
    sp.set_defaults(func=cmd_aggregate)

    for name, helptext, func in (
        ("simulate", "run one scenario and report metrics", cmd_simulate),
        ("sweep", "run a scenario over a grid of one parameter", cmd_sweep),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="scenario JSON file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--selection-z", type=float, default=None,
                        help="selection multiplier (1.96 two-sided, 1.645 one-sided)")
        sp.add_argument("--level", type=_level, default=None)
        sp.add_argument("--workers", type=int, default=1)
        if name == "simulate":
            sp.add_argument("--unconditional", action="store_true",
                            help="score all experiments, not only the selected ones")
        else:
            sp.add_argument("--axis", required=True, choices=sorted(simlab.SWEEP_AXES))
            sp.add_argument("--grid", type=_floats, default=None)
            sp.add_argument("--seeds", type=_ints, default=[0, 1, 2, 3, 4])
        common(sp)
        sp.set_defaults(func=func)

    sp = sub.add_parser("check", help="posterior predictive tail-area checks")
    sp.add_argument("experiments")
    sp.add_argument("--namespace", required=True)
    sp.add_argument("--estimator", choices=("global", "hybrid"), default="global")
    sp.add_argument("--statistics", type=lambda s: tuple(s.split(",")), default=("mean", "max", "sd"))
    sp.add_argument("--replicates", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    common(sp, needs_store=True)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("replicate-eval", help="MAE against replication studies")
    sp.add_argument("pairs", help="CSV with columns id,theta_hat,sigma_hat,rep_theta_hat,rep_sigma_hat")
    sp.add_argument("--namespace", required=True)
    common(sp, needs_store=True)
    sp.set_defaults(func=cmd_replicate_eval)

    sp = sub.add_parser("summarize", help="face-value summaries from unit-level data")
    sp.add_argument("units", help="CSV with columns id,outcome,assignment")
    sp.add_argument("--convention", choices=("ratio", "ratio_minus_one"), default="ratio_minus_one")
    common(sp)
    sp.set_defaults(func=cmd_summarize)

    sp = sub.add_parser("serve", help="start the HTTP adjustment service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8080)
    sp.add_argument("--reload-interval", type=float, default=60.0)
    common(sp, needs_store=True, output=False)
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        out = args.func(args)
    except StoreConflictError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RETRY
    except (InvalidInputError, ConfigurationError, EmptySelectionError, NotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if out:
        if getattr(args, "output", None):
            Path(args.output).write_text(out, encoding="utf-8")
        else:
            sys.stdout.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
