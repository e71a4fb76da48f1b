"""Shared helpers for wire-protocol tests: fixture loading and a tiny stub server."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

PROTOCOL_FIXTURE_DIR = Path(__file__).resolve().parents[1] / "fixtures" / "protocol"


def load_protocol_fixtures() -> list[dict]:
    fixtures = []
    for path in sorted(PROTOCOL_FIXTURE_DIR.glob("*.json")):
        fixtures.append(json.loads(path.read_text(encoding="utf-8")))
    assert fixtures, f"no protocol fixtures under {PROTOCOL_FIXTURE_DIR}"
    return fixtures


class _Handler(BaseHTTPRequestHandler):
    """Scriptable stub: the server instance carries a `script` callable."""

    def log_message(self, *args):  # keep test output clean
        pass

    def _respond(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        status, payload = self.server.script("GET", self.path, None, self.server)
        self._respond(status, payload)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length).decode("utf-8")
        request = json.loads(raw) if raw else {}
        self.server.requests.append((self.path, raw))
        status, payload = self.server.script("POST", self.path, request, self.server)
        self._respond(status, payload)


class StubServer:
    """Run a scripted HTTP stub on an ephemeral port for one test."""

    def __init__(self, script):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.httpd.script = script
        self.httpd.requests = []
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()

    @property
    def base_url(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    @property
    def requests(self):
        return self.httpd.requests
