"""Reference server for the audiopedia model wire protocol.

Hosts deterministic stub backends for all four roles behind /v1 and a
conformance self-test that replays the shared golden fixtures.
"""

from .app import ServerConfig, WireServer, make_server, serve
from .backends import BackendRegistry, STUB_BACKENDS
from .conformance import ConformanceReport, conformance_selftest

__version__ = "0.1.0"

__all__ = [
    "BackendRegistry",
    "ConformanceReport",
    "STUB_BACKENDS",
    "ServerConfig",
    "WireServer",
    "__version__",
    "conformance_selftest",
    "make_server",
    "serve",
]
