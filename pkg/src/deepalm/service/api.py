"""HTTP/JSON API over the monitor service, including the live event stream.

Built on the standard-library threading HTTP server: one thread per request,
server-sent events for /api/v1/stream, and optional static serving of the
dashboard build so the whole demo runs from one process.
"""

from __future__ import annotations

import json
import mimetypes
import queue
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Optional
from urllib.parse import parse_qs, urlparse

from .. import __version__
from ..fiber import IncidentSpec, SimulationError
from ..geo import route_to_geojson
from ..maintenance import MaintenanceError
from ..serde import FormatError, dumps
from ..siem import SiemError
from .alerts import IllegalTransitionError, UnknownAlertError
from .engine import IngestError, MonitorService, UnknownTargetError

_KEEPALIVE_S = 15.0


class ApiServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], service: MonitorService,
                 static_dir: Optional[Path] = None):
        super().__init__(address, ApiHandler)
        self.service = service
        self.static_dir = static_dir.resolve() if static_dir else None


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: ApiServer

    # quiet by default; the CLI enables logging when asked
    def log_message(self, format: str, *args: Any) -> None:
        pass

    # -- plumbing -----------------------------------------------------------

    def _send_json(self, status: int, payload: dict[str, Any]) -> None:
        body = dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_error(self, status: int, code: str, message: str) -> None:
        self._send_json(status, {"error": {"code": code, "message": message}})

    def _read_body(self) -> dict[str, Any]:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValueError(f"request body is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ValueError("request body must be a JSON object")
        return doc

    # -- routing ------------------------------------------------------------

    def do_GET(self) -> None:  # noqa: N802 (stdlib naming)
        url = urlparse(self.path)
        path = url.path
        service = self.server.service
        try:
            if path == "/api/v1/health":
                self._send_json(200, {"status": "ok", "version": __version__})
            elif path == "/api/v1/routes":
                self._send_json(
                    200, {"routes": [r.to_json() for r in service.routes.values()]}
                )
            elif m := re.fullmatch(r"/api/v1/routes/([^/]+)/trace/latest", path):
                trace = service.latest_trace(m.group(1))
                self._send_json(200, trace.to_json())
            elif m := re.fullmatch(r"/api/v1/routes/([^/]+)/events/latest", path):
                events = service.latest_events(m.group(1))
                self._send_json(
                    200, {"route_id": m.group(1), "events": [e.to_json() for e in events]}
                )
            elif path == "/api/v1/alerts":
                params = parse_qs(url.query)
                status = params.get("status", [None])[0]
                domain = params.get("domain", [None])[0]
                alerts = service.store.list_alerts(status=status, domain=domain)
                self._send_json(200, {"alerts": [a.to_json() for a in alerts]})
            elif m := re.fullmatch(r"/api/v1/devices/([^/]+)/health", path):
                est = service.device_health(m.group(1))
                self._send_json(200, est.to_json())
            elif path == "/api/v1/map/geojson":
                doc, warnings = route_to_geojson(
                    list(service.routes.values()), service.store.list_alerts()
                )
                if warnings:
                    doc = dict(doc, warnings=warnings)
                self._send_json(200, doc)
            elif path == "/api/v1/stream":
                self._stream()
            else:
                self._serve_static(path)
        except (UnknownTargetError, UnknownAlertError) as exc:
            self._send_error(404, "not_found", str(exc))
        except BrokenPipeError:
            pass
        except (ValueError, FormatError) as exc:
            self._send_error(400, "bad_request", str(exc))

    def do_POST(self) -> None:  # noqa: N802
        path = urlparse(self.path).path
        service = self.server.service
        try:
            if m := re.fullmatch(r"/api/v1/alerts/([^/]+)/(acknowledge|resolve)", path):
                body = self._read_body()
                tag = body.get("tag")
                if tag is not None and not isinstance(tag, str):
                    raise ValueError("tag must be a string")
                alert = service.store.transition(m.group(1), m.group(2), tag)
                self._send_json(200, alert.to_json())
            elif path == "/api/v1/scenario/inject":
                body = self._read_body()
                spec = IncidentSpec.from_json(body)
                incident_id = service.inject_incident(spec)
                self._send_json(202, {"incident_id": incident_id})
            else:
                self._send_error(404, "not_found", f"no such endpoint {path}")
        except (UnknownTargetError, UnknownAlertError) as exc:
            self._send_error(404, "not_found", str(exc))
        except IllegalTransitionError as exc:
            self._send_error(409, "illegal_transition", str(exc))
        except (SimulationError, MaintenanceError, SiemError, IngestError,
                FormatError, ValueError) as exc:
            self._send_error(400, "bad_request", str(exc))
        except BrokenPipeError:
            pass

    # -- server-sent events ---------------------------------------------------

    def _stream(self) -> None:
        service = self.server.service
        events: "queue.Queue[tuple[int, dict[str, Any]]]" = queue.Queue()

        def listener(seq: int, entry: dict[str, Any]) -> None:
            events.put((seq, entry))

        # Snapshot first, then live: subscribers see every alert at least once.
        unsubscribe = service.store.subscribe(listener)
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            for alert in service.store.list_alerts():
                self._write_sse(0, {"op": "snapshot", "alert": alert.to_json()})
            while True:
                try:
                    seq, entry = events.get(timeout=_KEEPALIVE_S)
                except queue.Empty:
                    self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
                    continue
                payload = dict(entry)
                alert_id = payload.get("alert_id") or payload.get("alert", {}).get("alert_id")
                if alert_id:
                    try:
                        payload["alert"] = service.store.get(alert_id).to_json()
                    except UnknownAlertError:
                        pass
                self._write_sse(seq, payload)
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            unsubscribe()

    def _write_sse(self, seq: int, payload: dict[str, Any]) -> None:
        data = dumps(payload)
        self.wfile.write(f"id: {seq}\nevent: alert\ndata: {data}\n\n".encode("utf-8"))
        self.wfile.flush()

    # -- static dashboard -------------------------------------------------------

    def _serve_static(self, path: str) -> None:
        root = self.server.static_dir
        if root is None:
            self._send_error(404, "not_found", f"no such endpoint {path}")
            return
        rel = path.lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if root not in target.parents and target != root:
            self._send_error(404, "not_found", "outside static root")
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._send_error(404, "not_found", f"no such file {path}")
            return
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def create_server(
    service: MonitorService,
    host: str = "127.0.0.1",
    port: int = 8080,
    static_dir: Optional[Path] = None,
) -> ApiServer:
    return ApiServer((host, port), service, static_dir=static_dir)


def serve_in_thread(server: ApiServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
