"""HTTP adjustment service.

Serves ``POST /adjust`` and ``GET /health`` as JSON. Hyperparameters are read
from the store at startup and re-read on a fixed interval, never per request.
Each reload swaps in a new immutable snapshot; a request that has already
grabbed a snapshot finishes against it.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .errors import InvalidInputError, NotFoundError
from .estimators import DEFAULT_LEVEL, posterior
from .models import ExperimentSummary
from .store import HyperStore, StoredHyper, read_store

log = logging.getLogger(__name__)

DEFAULT_RELOAD_INTERVAL = 60.0


class RequestError(Exception):
    def __init__(self, status: int, message: str, index: int | None = None):
        super().__init__(message)
        self.status = status
        self.message = message
        self.index = index

    def body(self) -> dict:
        out = {"error": self.message}
        if self.index is not None:
            out["index"] = self.index
        return out


@dataclass(frozen=True)
class Snapshot:
    generation: int
    store: HyperStore
    mtime_ns: int | None


def _file_mtime(path: Path) -> int | None:
    try:
        return path.stat().st_mtime_ns
    except FileNotFoundError:
        return None


def _number(value, name: str, index: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RequestError(422, f"{name} must be a number", index)
    value = float(value)
    if not math.isfinite(value):
        raise RequestError(422, f"{name} must be finite", index)
    return value


def parse_adjust_request(payload) -> tuple[str, list[ExperimentSummary], str, float]:
    if not isinstance(payload, dict):
        raise RequestError(422, "request body must be a JSON object")
    namespace = payload.get("namespace")
    if not isinstance(namespace, str) or not namespace:
        raise RequestError(422, "namespace must be a non-empty string")
    estimator = payload.get("estimator", "hybrid")
    if estimator not in ("global", "hybrid"):
        raise RequestError(422, "estimator must be 'global' or 'hybrid'")
    level = payload.get("level", DEFAULT_LEVEL)
    if isinstance(level, bool) or not isinstance(level, (int, float)) or not 0 < level < 1:
        raise RequestError(422, "level must be a number in (0, 1)")
    items = payload.get("experiments")
    if not isinstance(items, list) or not items:
        raise RequestError(422, "experiments must be a non-empty list")
    exps = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise RequestError(422, "experiment must be an object", i)
        eid = item.get("id")
        if not isinstance(eid, str) or not eid:
            raise RequestError(422, "id must be a non-empty string", i)
        theta_hat = _number(item.get("theta_hat"), "theta_hat", i)
        sigma_hat = _number(item.get("sigma_hat"), "sigma_hat", i)
        try:
            exps.append(ExperimentSummary(eid, theta_hat, sigma_hat))
        except InvalidInputError as exc:
            raise RequestError(422, str(exc), i) from None
    return namespace, exps, estimator, float(level)


class AdjustmentService:
    """Request handling independent of the transport."""

    def __init__(self, store_path: str | Path, reload_interval: float = DEFAULT_RELOAD_INTERVAL):
        self.store_path = Path(store_path)
        self.reload_interval = reload_interval
        self._snapshot = Snapshot(0, HyperStore({}), None)
        self._last_error: str | None = None
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.reload()

    @property
    def snapshot(self) -> Snapshot:
        return self._snapshot

    def reload(self) -> bool:
        """Re-read the store. On failure the previous snapshot stays live."""
        mtime = _file_mtime(self.store_path)
        try:
            if mtime is None:
                raise InvalidInputError(f"store {self.store_path} does not exist")
            store = read_store(self.store_path)
        except (InvalidInputError, OSError) as exc:
            with self._lock:
                self._last_error = str(exc)
            log.warning("store reload failed: %s", exc)
            return False
        with self._lock:
            self._snapshot = Snapshot(self._snapshot.generation + 1, store, mtime)
            self._last_error = None
        return True

    def handle_adjust(self, payload) -> dict:
        snap = self._snapshot
        namespace, exps, estimator, level = parse_adjust_request(payload)
        try:
            entry: StoredHyper = snap.store.get(namespace)
        except NotFoundError as exc:
            raise RequestError(404, str(exc)) from None
        results = []
        for i, exp in enumerate(exps):
            try:
                p = posterior(exp, entry.hyper, estimator, level)
            except InvalidInputError as exc:
                raise RequestError(422, str(exc), i) from None
            results.append({
                "id": exp.id,
                "posterior_mean": p.mean,
                "posterior_variance": p.variance,
                "lambda_used": p.lambda_used,
                "interval_lo": p.interval_lo,
                "interval_hi": p.interval_hi,
            })
        return {
            "namespace": namespace,
            "estimator": estimator,
            "level": level,
            "hyperparams_fitted_at": entry.fitted_at,
            "store_generation": snap.generation,
            "results": results,
        }

    def handle_health(self) -> dict:
        snap = self._snapshot
        with self._lock:
            err = self._last_error
        stale = _file_mtime(self.store_path) != snap.mtime_ns
        return {
            "status": "degraded" if err is not None else "ok",
            "store_generation": snap.generation,
            "namespaces_loaded": sorted(snap.store.namespaces),
            "stale": stale,
            "last_error": err,
        }

    def start(self) -> None:
        if self._thread is not None or self.reload_interval <= 0:
            return

        def loop():
            while not self._stop.wait(self.reload_interval):
                self.reload()

        self._thread = threading.Thread(target=loop, name="store-reloader", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None


def _handler_for(service: AdjustmentService):
    class Handler(BaseHTTPRequestHandler):
        server_version = "bhs/0.1"

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            if self.path == "/health":
                self._send(200, service.handle_health())
            else:
                self._send(404, {"error": f"no route {self.path}"})

        def do_POST(self):
            if self.path != "/adjust":
                self._send(404, {"error": f"no route {self.path}"})
                return
            length = int(self.headers.get("Content-Length") or 0)
            try:
                payload = json.loads(self.rfile.read(length) or b"null")
            except json.JSONDecodeError:
                self._send(400, {"error": "body is not valid JSON"})
                return
            try:
                self._send(200, service.handle_adjust(payload))
            except RequestError as exc:
                self._send(exc.status, exc.body())

        def log_message(self, format, *args):
            log.debug("%s - %s", self.address_string(), format % args)

    return Handler


def make_server(service: AdjustmentService, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), _handler_for(service))


def serve(
    store_path: str | Path,
    host: str = "127.0.0.1",
    port: int = 8080,
    reload_interval: float = DEFAULT_RELOAD_INTERVAL,
) -> None:
    service = AdjustmentService(store_path, reload_interval)
    service.start()
    server = make_server(service, host, port)
    log.info("serving on http://%s:%d (store %s)", host, server.server_port, store_path)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        service.stop()
