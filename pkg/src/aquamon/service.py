"""Local telemetry HTTP service.

JSON over plain HTTP, stdlib server, one handler thread per request:

    GET  /api/readings            latest atomic snapshot with statuses
    GET  /api/events?since=&limit=&cursor=   chronological event pages
    POST /api/feed   {"portions": n}
    POST /api/pump   {"on": bool}
    GET  /api/health {"status", "uptime_s", "clock_synced"}

Handlers never touch control state directly: reads come from a snapshot
cell the loop swaps once per cycle, commands go through the loop's queue
and are answered after the loop has processed them.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional, Protocol
from urllib.parse import parse_qs, urlparse

from .domain import (ParameterKind, ParameterReading, epoch_from_iso,
                     iso_from_epoch, violates)

logger = logging.getLogger(__name__)

DEFAULT_PORT = 80


class TelemetryBackend(Protocol):
    def snapshot(self) -> Optional[dict]: ...
    def events_page(self, since: Optional[float], cursor: Optional[int],
                    limit: int) -> dict: ...
    def submit_feed(self, portions: int, timeout: float = 2.0) -> dict: ...
    def submit_pump(self, on: bool, timeout: float = 2.0) -> dict: ...
    def health(self) -> dict: ...


def build_snapshot(cycle: int, server_time: float, readings: dict,
                   rules: dict, pump, feeder) -> dict:
    """Assemble the immutable /api/readings body for one poll cycle.

    Status is derived here, once, from the same values the body carries;
    clients must not re-derive thresholds.
    """
    readings_obj = {}
    statuses = {}
    for kind in ParameterKind:
        reading: Optional[ParameterReading] = readings.get(kind)
        if reading is None:
            continue
        readings_obj[kind.value] = {**reading.to_json_obj(),
                                    "unit": kind.unit,
                                    "label": kind.label}
        rule = rules.get(kind)
        bad = rule is not None and violates(rule, reading.value) is not None
        statuses[kind.value] = "alert" if bad else "ok"
    return {
        "server_time": iso_from_epoch(server_time),
        "poll_cycle": cycle,
        "readings": readings_obj,
        "statuses": statuses,
        "pump": {"on": pump.on,
                 "last_toggle": None if pump.last_toggle is None
                 else iso_from_epoch(pump.last_toggle)},
        "feeder": feeder.to_json_obj(),
    }


class _Handler(BaseHTTPRequestHandler):
    # set by the server factory
    backend: TelemetryBackend = None
    static_dir: Optional[Path] = None

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("%s %s", self.address_string(), fmt % args)

    # -- helpers -------------------------------------------------------------

    def _send_json(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            obj = json.loads(raw.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise ValueError("request body is not valid JSON")
        if not isinstance(obj, dict):
            raise ValueError("request body must be a JSON object")
        return obj

    # -- routes --------------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/api/readings":
            snap = self.backend.snapshot()
            if snap is None:
                self._send_json(503, {"error": "service_starting"})
            else:
                self._send_json(200, snap)
        elif url.path == "/api/events":
            self._get_events(parse_qs(url.query))
        elif url.path == "/api/health":
            self._send_json(200, self.backend.health())
        else:
            self._serve_static(url.path)

    def _get_events(self, query: dict) -> None:
        try:
            limit = int(query.get("limit", ["100"])[0])
            if limit < 1:
                raise ValueError("limit must be >= 1")
            since = None
            if "since" in query:
                since = epoch_from_iso(query["since"][0])
            cursor = None
            if "cursor" in query:
                cursor = int(query["cursor"][0])
        except ValueError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(200, self.backend.events_page(since, cursor, limit))

    def do_POST(self):
        url = urlparse(self.path)
        try:
            body = self._read_body()
        except ValueError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        if url.path == "/api/feed":
            portions = body.get("portions", 1)
            if not isinstance(portions, int) or portions < 1:
                self._send_json(400, {"error": "invalid_portions"})
                return
            self._finish_command(self.backend.submit_feed(portions))
        elif url.path == "/api/pump":
            if "on" not in body or not isinstance(body["on"], bool):
                self._send_json(400, {"error": "pump command needs boolean 'on'"})
                return
            self._finish_command(self.backend.submit_pump(body["on"]))
        else:
            self._send_json(404, {"error": "not found"})

    def _finish_command(self, result: dict) -> None:
        error = result.get("error")
        if error == "control_unavailable":
            self._send_json(503, result)
        elif error == "timeout":
            self._send_json(504, result)
        elif error == "invalid_portions":
            self._send_json(400, result)
        elif error:
            self._send_json(500, result)
        else:
            self._send_json(200, result)

    # -- static dashboard assets ----------------------------------------------

    def _serve_static(self, path: str) -> None:
        if self.static_dir is None:
            self._send_json(404, {"error": "not found"})
            return
        rel = path.lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        try:
            target.relative_to(self.static_dir.resolve())
        except ValueError:
            self._send_json(404, {"error": "not found"})
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._send_json(404, {"error": "not found"})
            return
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


class TelemetryService:
    """Owns the HTTP server thread for one backend."""

    def __init__(self, backend: TelemetryBackend, host: str = "0.0.0.0",
                 port: int = DEFAULT_PORT, static_dir=None):
        handler = type("BoundHandler", (_Handler,), {
            "backend": backend,
            "static_dir": Path(static_dir) if static_dir else None,
        })
        self._server = ThreadingHTTPServer((host, port), handler)
        self._server.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="telemetry-http", daemon=True)
        self._thread.start()
        logger.info("telemetry service listening on port %d", self.port)

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
