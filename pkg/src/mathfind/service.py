"""HTTP search service: JSON API plus the static web UI bundle.

Single-tenant research deployment: plain HTTP/1.1, no authentication, CORS
open for localhost UI development.  Requests are handled concurrently over
one read-only index snapshot; the index loads in the background after the
socket binds, and the API answers 503 until it is ready.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import signal
import socket
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlsplit

from .errors import EmptyQuery, IndexCorrupt, IoFailure, MalformedXml, UnbalancedGroup, UnsupportedCommand
from .index import IndexReader, open_index
from .mathml import find_islands
from .search import execute, parse_query

logger = logging.getLogger("mathfind.service")

DEFAULT_K = 10
MAX_K = 100

_FALLBACK_PAGE = b"""<!DOCTYPE html>
<html><head><title>mathfind</title></head>
<body><h1>mathfind search service</h1>
<p>No web UI bundle configured. API endpoints:</p>
<ul>
<li><code>GET /healthz</code></li>
<li><code>GET /api/search?q=...&amp;format=latex|mathml&amp;k=10&amp;offset=0</code></li>
<li><code>GET /api/doc/{id}</code></li>
</ul></body></html>
"""


class ServiceState:
    """Shared state: the index snapshot once loaded, or the load error."""

    def __init__(self, index_dir: str, ui_dir: str | None):
        self.index_dir = index_dir
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self.reader: IndexReader | None = None
        self.load_error: Exception | None = None
        self._loaded = threading.Event()

    def load(self):
        try:
            self.reader = open_index(self.index_dir)
            logger.info("index loaded: %d documents", self.reader.doc_count)
        except Exception as e:  # noqa: BLE001 - any load failure ends the service
            self.load_error = e
        finally:
            self._loaded.set()

    def wait_loaded(self, timeout: float | None = None) -> bool:
        return self._loaded.wait(timeout)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    state: ServiceState  # assigned on the subclass per server

    # -- plumbing ---------------------------------------------------------

    def log_message(self, *args):
        pass  # access log is written explicitly with timing

    def _send(self, status: int, body: bytes, content_type: str):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        try:
            self.wfile.write(body)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _send_json(self, status: int, payload: dict):
        self._send(status, json.dumps(payload).encode("utf-8"), "application/json; charset=utf-8")

    def do_GET(self):  # noqa: N802 - http.server naming
        started = time.perf_counter()
        split = urlsplit(self.path)
        route = unquote(split.path)
        status = 500
        try:
            status = self._route(route, parse_qs(split.query))
        except Exception:  # noqa: BLE001 - keep the worker alive
            logger.exception("unhandled error for %s", route)
            try:
                self._send_json(500, {"error": "internal error"})
            except Exception:  # noqa: BLE001
                pass
        finally:
            took_ms = (time.perf_counter() - started) * 1000.0
            logger.info("%s %s %d %.1fms", self.command, route, status, took_ms)

    def _route(self, route: str, params: dict[str, list[str]]) -> int:
        if route == "/healthz":
            return self._healthz()
        if route == "/api/search":
            return self._search(params)
        if route.startswith("/api/doc/"):
            return self._doc(route[len("/api/doc/"):])
        return self._static(route)

    # -- endpoints ---------------------------------------------------------

    def _ready(self) -> IndexReader | None:
        return self.state.reader

    def _healthz(self) -> int:
        reader = self._ready()
        if reader is None:
            self._send_json(503, {"status": "loading"})
            return 503
        self._send_json(200, {"status": "ok", "documents": reader.doc_count})
        return 200

    def _search(self, params: dict[str, list[str]]) -> int:
        reader = self._ready()
        if reader is None:
            self._send_json(503, {"error": "index loading"})
            return 503
        q = (params.get("q") or [""])[0]
        if not q.strip():
            self._send_json(400, {"error": "empty query", "offset": 0})
            return 400
        fmt = (params.get("format") or ["latex"])[0]
        if fmt not in ("latex", "mathml"):
            self._send_json(400, {"error": f"unknown format {fmt!r}", "offset": 0})
            return 400
        try:
            k = int((params.get("k") or [str(DEFAULT_K)])[0])
            offset = int((params.get("offset") or ["0"])[0])
        except ValueError:
            self._send_json(400, {"error": "k and offset must be integers", "offset": 0})
            return 400
        k = max(1, min(k, MAX_K))
        offset = max(0, offset)

        started = time.perf_counter()
        try:
            query = parse_query(q, math_format=fmt, config=reader.pipeline_config)
        except (UnsupportedCommand, UnbalancedGroup, MalformedXml, EmptyQuery) as e:
            self._send_json(400, {"error": str(e), "offset": getattr(e, "position", 0)})
            return 400
        results, total = execute(reader, query, top_k=k, offset=offset)
        took_ms = (time.perf_counter() - started) * 1000.0

        payload = {
            "query_echo": q,
            "total_hits": total,
            "took_ms": took_ms,
            "results": [
                {
                    "doc_id": r.doc_id,
                    "score": r.score,
                    "title": r.title,
                    "path": r.path,
                    "snippet": r.snippet,
                    "highlights": [
                        {"start": s, "end": e, "kind": kind.value}
                        for (s, e), kind in r.highlights
                    ],
                }
                for r in results
            ],
        }
        self._send_json(200, payload)
        return 200

    def _doc(self, raw_id: str) -> int:
        reader = self._ready()
        if reader is None:
            self._send_json(503, {"error": "index loading"})
            return 503
        try:
            doc_id = int(raw_id)
        except ValueError:
            self._send_json(404, {"error": f"bad document id {raw_id!r}"})
            return 404
        if not 0 <= doc_id < reader.doc_count:
            self._send_json(404, {"error": f"document {doc_id} not found"})
            return 404
        record = reader.doc(doc_id)
        spans = find_islands(record.stored_body)
        self._send_json(
            200,
            {
                "doc_id": doc_id,
                "title": record.title,
                "path": record.path,
                "body": record.stored_body.decode("utf-8", errors="replace"),
                "formulae": [{"start": s, "end": e} for s, e in spans],
            },
        )
        return 200

    # -- static UI ----------------------------------------------------------

    def _static(self, route: str) -> int:
        ui_dir = self.state.ui_dir
        if route == "/" or route == "/index.html":
            if ui_dir is None:
                self._send(200, _FALLBACK_PAGE, "text/html; charset=utf-8")
                return 200
            route = "/index.html"
        if ui_dir is None:
            self._send_json(404, {"error": "not found"})
            return 404
        target = (ui_dir / route.lstrip("/")).resolve()
        inside = target == ui_dir or str(target).startswith(str(ui_dir) + "/")
        if not inside or not target.is_file():
            self._send_json(404, {"error": "not found"})
            return 404
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), ctype)
        return 200


def make_server(index_dir: str, bind: str, ui_dir: str | None = None) -> tuple[ThreadingHTTPServer, ServiceState]:
    """Bind the socket and kick off the background index load."""
    host, _, port_str = bind.rpartition(":")
    if not host or not port_str.isdigit():
        raise ValueError(f"bind address must be host:port, got {bind!r}")
    state = ServiceState(index_dir, ui_dir)

    handler = type("BoundHandler", (_Handler,), {"state": state})
    server = ThreadingHTTPServer((host, int(port_str)), handler)
    server.daemon_threads = False  # graceful: in-flight requests finish
    threading.Thread(target=state.load, name="index-loader", daemon=True).start()
    return server, state


def serve(index_dir: str, bind: str = "127.0.0.1:8080", ui_dir: str | None = None) -> int:
    """Run the service until SIGTERM/SIGINT; returns a process exit code."""
    try:
        server, state = make_server(index_dir, bind, ui_dir)
    except (OSError, socket.error, ValueError) as e:
        print(f"error: cannot bind {bind}: {e}", file=sys.stderr)
        return 2
    logger.info("serving on http://%s:%d/ (index: %s)", *server.server_address[:2], index_dir)

    def request_shutdown(signum, _frame):
        logger.info("signal %d: shutting down after in-flight requests", signum)
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, request_shutdown)
    signal.signal(signal.SIGINT, request_shutdown)

    # surface index-load failures as a service exit rather than eternal 503
    def watch_load():
        state.wait_loaded()
        if state.load_error is not None:
            logger.error("index load failed: %s", state.load_error)
            threading.Thread(target=server.shutdown, daemon=True).start()

    threading.Thread(target=watch_load, daemon=True).start()

    try:
        server.serve_forever(poll_interval=0.1)
    finally:
        server.server_close()
    if state.load_error is not None:
        if isinstance(state.load_error, (IndexCorrupt, IoFailure)):
            print(f"error: cannot open index: {state.load_error}", file=sys.stderr)
        return 2
    if state.reader is not None:
        state.reader.close()
    return 0
