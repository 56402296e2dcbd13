"""JSON-over-HTTP front for the monitor service.

Endpoint paths and payload field names are part of the public contract
and are frozen by tests; see README for the reference. Runs on the
standard-library threading HTTP server, which is plenty at desk scale.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from .errors import (
    AnalysisRejectedError,
    ConfigError,
    DriftwatchError,
    InvalidInputError,
    SchemaError,
)
from .service import MonitorService

_ROUTES = [
    ("GET", re.compile(r"^/api/health$"), "health"),
    ("POST", re.compile(r"^/api/ingest/entry$"), "ingest_entry"),
    ("POST", re.compile(r"^/api/ingest/sample$"), "ingest_sample"),
    ("POST", re.compile(r"^/api/windows/close$"), "close_window"),
    ("POST", re.compile(r"^/api/analysis/run$"), "run_analysis"),
    ("GET", re.compile(r"^/api/alerts$"), "list_alerts"),
    ("POST", re.compile(r"^/api/alerts/(?P<alert_id>\d+)/ack$"), "ack_alert"),
    ("GET", re.compile(r"^/api/reports/(?P<window_id>\d+)$"), "get_report"),
    ("GET", re.compile(r"^/api/pool$"), "get_pool"),
    ("GET", re.compile(r"^/api/mode$"), "get_mode"),
    ("POST", re.compile(r"^/api/mode$"), "set_mode"),
    ("POST", re.compile(r"^/api/adaptation/run$"), "trigger_adaptation"),
    ("GET", re.compile(r"^/api/timeline$"), "get_timeline"),
]


class _Handler(BaseHTTPRequestHandler):
    service: MonitorService  # set by server factory

    # quiet the default per-request stderr logging
    def log_message(self, fmt, *args):  # noqa: A002
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, code: str, message: str, field: Optional[str] = None):
        err = {"code": code, "message": message}
        if field is not None:
            err["field"] = field
        self._send(status, {"error": err})

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaError("body", f"request body is not valid JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise SchemaError("body", "request body must be a JSON object")
        return parsed

    def do_OPTIONS(self):  # CORS preflight for the dashboard
        self._send(200, {})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def _dispatch(self, method: str) -> None:
        path, _, query = self.path.partition("?")
        for verb, pattern, name in _ROUTES:
            if verb != method:
                continue
            m = pattern.match(path)
            if not m:
                continue
            try:
                handler = getattr(self, f"_h_{name}")
                handler(m.groupdict(), query)
            except SchemaError as exc:
                self._error(400, "schema", str(exc), field=exc.field)
            except (InvalidInputError, ConfigError) as exc:
                self._error(400, "invalid", str(exc))
            except AnalysisRejectedError as exc:
                self._error(409, "rejected", str(exc))
            except DriftwatchError as exc:
                self._error(500, "internal", str(exc))
            return
        self._error(404, "not_found", f"no route for {method} {path}")

    # -- handlers -----------------------------------------------------------

    def _h_health(self, params, query):
        self._send(200, {"status": "ok"})

    def _h_ingest_entry(self, params, query):
        self._send(200, self.service.ingest_entry(self._body()))

    def _h_ingest_sample(self, params, query):
        body = self._body()
        try:
            device_id = body["device_id"]
            features = body["features"]
            attributes = body.get("attributes", {})
        except KeyError as exc:
            raise SchemaError(str(exc), f"missing field {exc}") from exc
        self._send(
            200,
            self.service.ingest_sample(
                device_id, features, attributes, timestamp=body.get("timestamp")
            ),
        )

    def _h_close_window(self, params, query):
        body = self._body()
        if "window_id" not in body:
            raise SchemaError("window_id", "missing field window_id")
        self._send(200, self.service.close_window(int(body["window_id"])))

    def _h_run_analysis(self, params, query):
        body = self._body()
        if "window_id" not in body:
            raise SchemaError("window_id", "missing field window_id")
        self._send(200, self.service.run_analysis(int(body["window_id"])))

    def _h_list_alerts(self, params, query):
        self._send(200, {"alerts": self.service.list_alerts()})

    def _h_ack_alert(self, params, query):
        self._send(200, self.service.acknowledge_alert(int(params["alert_id"])))

    def _h_get_report(self, params, query):
        self._send(200, self.service.get_report(int(params["window_id"])))

    def _h_get_pool(self, params, query):
        self._send(200, self.service.get_pool())

    def _h_get_mode(self, params, query):
        self._send(200, self.service.get_mode())

    def _h_set_mode(self, params, query):
        body = self._body()
        if "mode" not in body:
            raise SchemaError("mode", "missing field mode")
        self._send(200, self.service.set_mode(body["mode"]))

    def _h_trigger_adaptation(self, params, query):
        body = self._body()
        if "window_id" not in body:
            raise SchemaError("window_id", "missing field window_id")
        self._send(
            200,
            self.service.trigger_adaptation(
                int(body["window_id"]), body.get("cause_ids")
            ),
        )

    def _h_get_timeline(self, params, query):
        metric = "drift_rate"
        for part in query.split("&"):
            if part.startswith("metric="):
                metric = part.split("=", 1)[1]
        self._send(200, self.service.get_timeline(metric))


class ApiServer:
    """Owns the HTTP server thread; use as a context manager in tests."""

    def __init__(self, service: MonitorService, host: str = "127.0.0.1", port: int = 0):
        handler = type("BoundHandler", (_Handler,), {"service": service})
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ApiServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "ApiServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
