"""HTTP layer: routes /v1 requests to registered backends.

JSON over HTTP, errors as non-2xx with {"error": str}. The server is
threaded and the stub backends are stateless, so concurrent requests are
safe.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .backends import BackendError, BackendRegistry


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    registry: BackendRegistry = field(default_factory=BackendRegistry)


class _Handler(BaseHTTPRequestHandler):
    server_version = "audiopedia-server/0.1"

    def log_message(self, *args) -> None:
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path == "/v1/health":
            self._send(200, {"status": "ok", "roles": self.server.registry.roles})
        else:
            self._send(404, {"error": f"no route for GET {self.path}"})

    def do_POST(self) -> None:
        role = {
            "/v1/asr": "asr",
            "/v1/tts": "tts",
            "/v1/encode": "encode",
            "/v1/answer": "answer",
        }.get(self.path)
        if role is None:
            self._send(404, {"error": f"no route for POST {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length).decode("utf-8")
            payload = json.loads(raw) if raw else {}
        except (ValueError, UnicodeDecodeError) as exc:
            self._send(400, {"error": f"invalid JSON body: {exc}"})
            return
        try:
            backend = self.server.registry.get(role)
        except KeyError:
            self._send(404, {"error": f"no backend registered for {role}"})
            return
        try:
            self._send(200, backend(payload))
        except BackendError as exc:
            self._send(400, {"error": str(exc)})
        except Exception as exc:  # backend crash must not kill the server
            self._send(500, {"error": f"{type(exc).__name__}: {exc}"})


class WireServer(ThreadingHTTPServer):
    def __init__(self, config: ServerConfig):
        self.registry = config.registry
        super().__init__((config.host, config.port), _Handler)

    @property
    def base_url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


def make_server(config: ServerConfig | None = None) -> WireServer:
    """Bind and return the server; call serve_forever() to run it."""
    return WireServer(config or ServerConfig())


def serve(config: ServerConfig | None = None) -> None:
    server = make_server(config)
    try:
        print(f"serving wire protocol on {server.base_url} roles={server.registry.roles}")
        server.serve_forever()
    finally:
        server.server_close()
