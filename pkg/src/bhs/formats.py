"""CSV and JSON file formats.

Experiment CSV   ``id,theta_hat,sigma_hat[,selected]``
Curated CSV      ``id,eta_hat,gamma``
Pair CSV         ``id,theta_hat,sigma_hat,rep_theta_hat,rep_sigma_hat``
Unit CSV         ``id,outcome,assignment``
Posterior CSV    :data:`POSTERIOR_COLUMNS`

Parsing is strict: exact headers, decimal numbers only, no blank fields
except an empty ``selected``. Floats are written with ``repr`` so they read
back bit-for-bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import fields
from pathlib import Path
from typing import Callable, Iterable, Sequence, TextIO, TypeVar

from .diagnostics import ReplicationPair
from .errors import ConfigurationError, InvalidInputError
from .hyperfit import CuratedObservation
from .models import ExperimentSummary, PosteriorSummary
from .simlab import ScenarioConfig

EXPERIMENT_COLUMNS = ("id", "theta_hat", "sigma_hat", "selected")
CURATED_COLUMNS = ("id", "eta_hat", "gamma")
PAIR_COLUMNS = ("id", "theta_hat", "sigma_hat", "rep_theta_hat", "rep_sigma_hat")
UNIT_COLUMNS = ("id", "outcome", "assignment")
POSTERIOR_COLUMNS = (
    "id", "estimator", "mean", "variance", "lambda_used",
    "interval_level", "interval_lo", "interval_hi",
)

_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")

T = TypeVar("T")


class FormatError(InvalidInputError):
    """A file does not match its schema. ``line`` is 1-based, header included."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path:
            where += f"{path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)
        self.line = line
        self.path = path


def fmt(x: float | int | None) -> str:
    """Shortest decimal that round-trips; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def parse_number(text: str, column: str) -> float:
    if not _NUMBER.fullmatch(text):
        raise InvalidInputError(f"{column}: {text!r} is not a decimal number")
    return float(text)


def _parse_bool(text: str) -> bool | None:
    if text == "":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    raise InvalidInputError(f"selected: {text!r} must be true, false or empty")


def _open(source: str | Path | TextIO):
    if isinstance(source, (str, Path)):
        return open(source, newline="", encoding="utf-8"), str(source)
    return source, getattr(source, "name", None)


def _read_rows(
    source: str | Path | TextIO,
    required: Sequence[str],
    optional: Sequence[str],
    build: Callable[[dict[str, str]], T],
) -> list[T]:
    fh, name = _open(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("file is empty", path=name) from None
        allowed = (tuple(required), tuple(required) + tuple(optional))
        if tuple(header) not in allowed:
            raise FormatError(
                f"header must be {','.join(allowed[-1])}, got {','.join(header)}", 1, name
            )
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"expected {len(header)} fields, got {len(row)}", lineno, name)
            try:
                out.append(build(dict(zip(header, row))))
            except (InvalidInputError, ValueError) as exc:
                raise FormatError(str(exc), lineno, name) from None
        return out
    finally:
        if isinstance(source, (str, Path)):
            fh.close()


def _require_id(text: str) -> str:
    if text == "":
        raise InvalidInputError("id must not be empty")
    return text


def parse_experiments(source: str | Path | TextIO) -> list[ExperimentSummary]:
    def build(row):
        return ExperimentSummary(
            id=_require_id(row["id"]),
            theta_hat=parse_number(row["theta_hat"], "theta_hat"),
            sigma_hat=parse_number(row["sigma_hat"], "sigma_hat"),
            selected=_parse_bool(row.get("selected", "")),
        )

    return _read_rows(source, EXPERIMENT_COLUMNS[:3], EXPERIMENT_COLUMNS[3:], build)


def parse_curated(source: str | Path | TextIO) -> list[CuratedObservation]:
    def build(row):
        return CuratedObservation(
            id=_require_id(row["id"]),
            eta_hat=parse_number(row["eta_hat"], "eta_hat"),
            gamma=parse_number(row["gamma"], "gamma"),
        )

    return _read_rows(source, CURATED_COLUMNS, (), build)


def parse_pairs(source: str | Path | TextIO) -> list[ReplicationPair]:
    def build(row):
        i = _require_id(row["id"])
        return ReplicationPair(
            original=ExperimentSummary(
                i, parse_number(row["theta_hat"], "theta_hat"),
                parse_number(row["sigma_hat"], "sigma_hat"),
            ),
            replication=ExperimentSummary(
                i, parse_number(row["rep_theta_hat"], "rep_theta_hat"),
                parse_number(row["rep_sigma_hat"], "rep_sigma_hat"),
            ),
        )

    return _read_rows(source, PAIR_COLUMNS, (), build)


def parse_units(source: str | Path | TextIO) -> dict[str, tuple[list[float], list[int]]]:
    """Group unit rows by experiment id, preserving first-seen order."""

    def build(row):
        a = row["assignment"]
        if a not in ("0", "1"):
            raise InvalidInputError(f"assignment: {a!r} must be 0 or 1")
        return _require_id(row["id"]), parse_number(row["outcome"], "outcome"), int(a)

    groups: dict[str, tuple[list[float], list[int]]] = {}
    for i, y, z in _read_rows(source, UNIT_COLUMNS, (), build):
        ys, zs = groups.setdefault(i, ([], []))
        ys.append(y)
        zs.append(z)
    return groups


def _write_table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def experiments_csv(exps: Sequence[ExperimentSummary]) -> str:
    with_sel = any(e.selected is not None for e in exps)
    header = EXPERIMENT_COLUMNS if with_sel else EXPERIMENT_COLUMNS[:3]
    rows = []
    for e in exps:
        r = [e.id, fmt(e.theta_hat), fmt(e.sigma_hat)]
        if with_sel:
            r.append(fmt(e.selected))
        rows.append(r)
    return _write_table(header, rows)


def curated_csv(obs: Sequence[CuratedObservation]) -> str:
    return _write_table(CURATED_COLUMNS, ([o.id, fmt(o.eta_hat), fmt(o.gamma)] for o in obs))


def pairs_csv(pairs: Sequence[ReplicationPair]) -> str:
    return _write_table(
        PAIR_COLUMNS,
        (
            [p.id, fmt(p.original.theta_hat), fmt(p.original.sigma_hat),
             fmt(p.replication.theta_hat), fmt(p.replication.sigma_hat)]
            for p in pairs
        ),
    )


def posterior_csv(rows: Iterable[tuple[str, str, PosteriorSummary]]) -> str:
    return _write_table(
        POSTERIOR_COLUMNS,
        (
            [i, est, fmt(p.mean), fmt(p.variance), fmt(p.lambda_used),
             fmt(p.interval_level), fmt(p.interval_lo), fmt(p.interval_hi)]
            for i, est, p in rows
        ),
    )


def parse_posteriors(source: str | Path | TextIO) -> list[tuple[str, str, PosteriorSummary]]:
    def num(row, col, allow_empty=False):
        if allow_empty and row[col] == "":
            return math.nan
        return parse_number(row[col], col)

    def build(row):
        variance = num(row, "variance")
        if not variance > 0:
            raise InvalidInputError("variance must be positive")
        return (
            _require_id(row["id"]),
            row["estimator"],
            PosteriorSummary(
                mean=num(row, "mean"),
                variance=variance,
                lambda_used=num(row, "lambda_used", allow_empty=True),
                interval_level=num(row, "interval_level"),
                interval_lo=num(row, "interval_lo"),
                interval_hi=num(row, "interval_hi"),
            ),
        )

    return _read_rows(source, POSTERIOR_COLUMNS, (), build)


def table_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    return _write_table(header, ([fmt(v) if not isinstance(v, str) else v for v in r] for r in rows))


def load_config(path: str | Path) -> ScenarioConfig:
    """Read a scenario file: one flat JSON object naming every field.

    ``nu`` and ``rho`` must be present and ``null`` for families that do not
    use them.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ConfigurationError(f"{path}: config must be a JSON object")
    names = [f.name for f in fields(ScenarioConfig)]
    missing = [n for n in names if n not in d]
    if missing:
        raise ConfigurationError(f"{path}: missing config keys {missing}")
    return ScenarioConfig.from_dict(d)


def dump_config(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2) + "\n"
