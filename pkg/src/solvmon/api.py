"""HTTP JSON API over a calibration bundle.

Endpoints (all responses carry the bundle version):

    GET  /v1/health                      liveness probe
    GET  /v1/bundle                      calibration metadata
    GET  /v1/solvency/latest             most recent monitoring record
    GET  /v1/solvency/history?from&to&smoothed=true
    POST /v1/whatif                      body {"factors": {id: shift}}
    GET  /v1/sensitivity?f1=...&f2=...&grid=11
    POST /v1/attribution                 body {"factors": {...}, "order": [...]}
    POST /v1/ingest                      body {"rows": [{date, factor_id, field, value}]}
    GET  /v1/diagram                     per-factor level vs probable bounds

Reads are served concurrently; ingestion (and the record evaluation it
triggers) is serialized through a single writer lock.  After a successful
ingest, any newly complete post-calibration dates are evaluated and
appended to the record store, which is what makes the service continuous.
"""

from __future__ import annotations

import json
import signal
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import monitor
from .errors import ConfigError, DataError, DomainError, SolvmonError
from .monitor import CalibrationBundle, MarketDataStore, RecordStore

__all__ = ["build_server", "run"]


class ApiState:
    def __init__(self, bundle: CalibrationBundle, market_store: MarketDataStore,
                 record_store: RecordStore):
        self.bundle = bundle
        self.market_store = market_store
        self.record_store = record_store
        self.write_lock = threading.Lock()

    def evaluate_new_dates(self) -> int:
        """Evaluate ingested dates not yet in the record store (locked)."""
        try:
            history = self.market_store.to_history()
        except DataError:
            return 0  # store empty or rows incomplete: nothing evaluable yet
        done = self.record_store.dates()
        produced = 0
        for t in history.dates:
            if t <= self.bundle.calibration_date or t.isoformat() in done:
                continue
            self.record_store.append(monitor.evaluate_date(self.bundle, history, t))
            produced += 1
        return produced


class _Handler(BaseHTTPRequestHandler):
    state: ApiState  # injected by build_server

    # -- plumbing -----------------------------------------------------------

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, code: int, payload: dict) -> None:
        body = json.dumps(payload, sort_keys=True).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()
        self.wfile.write(body)

    def _ok(self, payload: dict) -> None:
        payload.setdefault("bundle_version", self.state.bundle.version)
        self._send(200, payload)

    def _error(self, code: int, message: str) -> None:
        self._send(code, {"error": message, "bundle_version": self.state.bundle.version})

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            data = json.loads(raw or b"{}")
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON body: {exc}") from None
        if not isinstance(data, dict):
            raise DataError("request body must be a JSON object")
        return data

    def _factors_to_eps(self, factors) -> np.ndarray:
        if not isinstance(factors, dict):
            raise DataError("'factors' must map factor ids to shifts")
        ids = self.state.bundle.factor_ids
        unknown = [f for f in factors if f not in ids]
        if unknown:
            raise DataError(f"unknown factor ids {unknown}; expected {ids}")
        try:
            return np.array([float(factors.get(fid, 0.0)) for fid in ids])
        except (TypeError, ValueError) as exc:
            raise DataError(f"factor shifts must be numbers: {exc}") from None

    # -- dispatch -----------------------------------------------------------

    def do_OPTIONS(self):
        self._send(204, {})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def _dispatch(self, method: str) -> None:
        url = urlparse(self.path)
        query = {k: v[-1] for k, v in parse_qs(url.query).items()}
        routes = {
            ("GET", "/v1/health"): self._health,
            ("GET", "/v1/bundle"): self._bundle,
            ("GET", "/v1/solvency/latest"): self._latest,
            ("GET", "/v1/solvency/history"): self._history,
            ("POST", "/v1/whatif"): self._whatif,
            ("GET", "/v1/sensitivity"): self._sensitivity,
            ("POST", "/v1/attribution"): self._attribution,
            ("POST", "/v1/ingest"): self._ingest,
            ("GET", "/v1/diagram"): self._diagram,
        }
        handler = routes.get((method, url.path))
        if handler is None:
            self._error(404, f"no route {method} {url.path}")
            return
        try:
            handler(query)
        except (DataError, DomainError, ConfigError) as exc:
            self._error(400, str(exc))
        except SolvmonError as exc:
            self._error(500, str(exc))

    # -- endpoints ----------------------------------------------------------

    def _health(self, query):
        self._ok({"status": "ok"})

    def _bundle(self, query):
        bundle = self.state.bundle
        self._ok({
            "calibration_date": bundle.calibration_date.isoformat(),
            "config_hash": bundle.config_hash,
            "factor_ids": bundle.factor_ids,
            "shocks": sorted(bundle.shocked),
            "alpha": bundle.space.alpha,
            "smoothing_window": bundle.smoothing_window,
            "attribution_order": bundle.attribution_order,
            "calibration_snapshot": bundle.calibration_snapshot.to_dict(),
            "records": len(self.state.record_store),
        })

    def _latest(self, query):
        latest = self.state.record_store.latest()
        if latest is None:
            self._error(404, "no monitoring records yet")
            return
        self._ok({"record": latest})

    def _history(self, query):
        records = self.state.record_store.records()
        d_from, d_to = query.get("from"), query.get("to")
        if d_from:
            records = [r for r in records if r["date"] >= d_from]
        if d_to:
            records = [r for r in records if r["date"] <= d_to]
        payload = {
            "dates": [r["date"] for r in records],
            "sr": [r["snapshot"]["sr"] for r in records],
            "validity": [r["validity"] for r in records],
        }
        if query.get("smoothed", "false").lower() in ("1", "true", "yes"):
            # smoothing runs on the full series, then is cut to the range,
            # so the first windows of a range are not artificially partial
            full = self.state.record_store.records()
            smoothed = monitor.smoothed_sr(
                [r["snapshot"]["sr"] for r in full], self.state.bundle.smoothing_window
            )
            by_date = {r["date"]: float(s) for r, s in zip(full, smoothed)}
            payload["smoothed_sr"] = [by_date[d] for d in payload["dates"]]
        self._ok(payload)

    def _whatif(self, query):
        body = self._body()
        eps = self._factors_to_eps(body.get("factors", {}))
        snapshot = monitor.whatif(self.state.bundle, eps)
        self._ok({
            "transition": {fid: float(v) for fid, v in zip(self.state.bundle.factor_ids, eps)},
            "snapshot": snapshot.to_dict(),
            "out_of_space": any(f.startswith("out_of_space") for f in snapshot.flags),
        })

    def _sensitivity(self, query):
        factors = [f for f in (query.get("f1"), query.get("f2")) if f]
        if not factors:
            raise DataError("at least 'f1' is required")
        grid_size = int(query.get("grid", 11))
        grid = monitor.sensitivity_grid(self.state.bundle, factors, grid=grid_size)
        self._ok(grid.to_dict())

    def _attribution(self, query):
        body = self._body()
        eps = self._factors_to_eps(body.get("factors", {}))
        order = body.get("order")
        result = monitor.marginal_attribution(self.state.bundle, eps, order=order)
        self._ok(result.to_dict())

    def _ingest(self, query):
        body = self._body()
        rows = body.get("rows")
        if not isinstance(rows, list):
            raise DataError("'rows' must be a list of market observations")
        with self.state.write_lock:
            result = monitor.ingest(self.state.market_store, rows)
            evaluated = self.state.evaluate_new_dates() if result.changed else 0
        self._ok({
            "inserted": result.inserted,
            "updated": result.updated,
            "unchanged": result.unchanged,
            "rejected": result.rejected,
            "records_evaluated": evaluated,
        })

    def _diagram(self, query):
        bundle = self.state.bundle
        latest = self.state.record_store.latest()
        current = latest["transition"] if latest else [0.0] * len(bundle.factor_ids)
        self._ok({
            "as_of": latest["date"] if latest else bundle.calibration_date.isoformat(),
            "factors": [
                {
                    "id": fid,
                    "lo": float(bundle.space.lo[i]),
                    "hi": float(bundle.space.hi[i]),
                    "current": float(current[i]),
                    "out_of_space": not (
                        bundle.space.lo[i] <= current[i] <= bundle.space.hi[i]
                    ),
                }
                for i, fid in enumerate(bundle.factor_ids)
            ],
        })


def build_server(
    bundle: CalibrationBundle,
    market_store: MarketDataStore,
    record_store: RecordStore,
    host: str = "127.0.0.1",
    port: int = 8799,
) -> ThreadingHTTPServer:
    state = ApiState(bundle, market_store, record_store)
    handler = type("BoundHandler", (_Handler,), {"state": state})
    try:
        return ThreadingHTTPServer((host, port), handler)
    except OSError as exc:
        raise ConfigError(f"cannot bind {host}:{port}: {exc}") from None


def run(server: ThreadingHTTPServer) -> None:
    """Serve until SIGINT/SIGTERM, then shut down gracefully."""
    stop = threading.Event()

    def _signal(signum, frame):
        stop.set()
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGINT, _signal)
    signal.signal(signal.SIGTERM, _signal)
    try:
        server.serve_forever()
    finally:
        server.server_close()
