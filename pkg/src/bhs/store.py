"""Namespaced hyperparameter store backed by one JSON document.

Layout::

    {"<namespace>": {"m0": 0.0, "tau": 1.0, "a": 1.0, "b": 1.0,
                     "fitted_at": "2026-01-01T00:00:00+00:00", "source": "..."}}

Writes take an exclusive lock next to the store, rewrite a temporary file in
the same directory and rename it over the original, so readers never see a
half-written document.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from filelock import FileLock, Timeout

from .errors import InvalidInputError, NotFoundError, StoreConflictError
from .models import HyperParameters

STORE_ENV = "BHS_STORE"


@dataclass(frozen=True)
class StoredHyper:
    hyper: HyperParameters
    fitted_at: str
    source: str = ""

    def to_dict(self) -> dict:
        h = self.hyper
        return {"m0": h.m0, "tau": h.tau, "a": h.a, "b": h.b,
                "fitted_at": self.fitted_at, "source": self.source}

    @classmethod
    def from_dict(cls, d: dict) -> "StoredHyper":
        try:
            hyper = HyperParameters(
                m0=float(d["m0"]), tau=float(d["tau"]), a=float(d["a"]), b=float(d["b"])
            )
            return cls(hyper=hyper, fitted_at=str(d["fitted_at"]), source=str(d.get("source", "")))
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed store entry: {exc}") from None


@dataclass(frozen=True)
class HyperStore:
    namespaces: dict[str, StoredHyper]

    def to_json(self) -> str:
        return json.dumps(
            {k: v.to_dict() for k, v in sorted(self.namespaces.items())}, indent=2
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "HyperStore":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"store is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise InvalidInputError("store document must be a JSON object")
        return cls({str(k): StoredHyper.from_dict(v) for k, v in raw.items()})

    def get(self, namespace: str) -> StoredHyper:
        try:
            return self.namespaces[namespace]
        except KeyError:
            raise NotFoundError(f"namespace {namespace!r} not in store") from None


def default_store_path() -> Path | None:
    p = os.environ.get(STORE_ENV)
    return Path(p) if p else None


def read_store(path: str | Path) -> HyperStore:
    path = Path(path)
    if not path.exists():
        return HyperStore({})
    return HyperStore.from_json(path.read_text(encoding="utf-8"))


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def store_hyperparams(
    path: str | Path,
    namespace: str,
    hyper: HyperParameters,
    source: str = "",
    fitted_at: str | None = None,
    lock_timeout: float = 10.0,
) -> HyperStore:
    """Insert or replace one namespace and return the updated store."""
    if not namespace:
        raise InvalidInputError("namespace must not be empty")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fitted_at is None:
        fitted_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    try:
        with FileLock(str(path) + ".lock", timeout=lock_timeout):
            current = read_store(path)
            entries = dict(current.namespaces)
            entries[namespace] = StoredHyper(hyper, fitted_at, source)
            updated = HyperStore(entries)
            _atomic_write(path, updated.to_json())
    except Timeout:
        raise StoreConflictError(f"store {path} is locked by another writer; retry") from None
    return updated


def load_entry(path: str | Path, namespace: str) -> StoredHyper:
    return read_store(path).get(namespace)


def load_hyperparams(path: str | Path, namespace: str) -> HyperParameters:
    return load_entry(path, namespace).hyper
