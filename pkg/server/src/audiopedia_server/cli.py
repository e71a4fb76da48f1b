"""Server CLI: run the reference server or replay the conformance fixtures."""

from __future__ import annotations

import argparse
import importlib
import sys

from .app import ServerConfig, serve
from .backends import BackendRegistry
from .conformance import DEFAULT_FIXTURE_DIR, conformance_selftest


def _load_hook(spec: str):
    """Resolve a real-model hook given as 'role=module.path:callable'."""
    role, _, target = spec.partition("=")
    module_name, _, attr = target.partition(":")
    if not (role and module_name and attr):
        raise ValueError(f"backend spec must be role=module:callable, got {spec!r}")
    module = importlib.import_module(module_name)
    return role, getattr(module, attr)


def cmd_serve(args) -> int:
    registry = BackendRegistry()
    for spec in args.backend or []:
        role, hook = _load_hook(spec)
        registry.register(role, hook)
    try:
        serve(ServerConfig(host=args.host, port=args.port, registry=registry))
    except OSError as exc:
        print(f"startup failed: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        pass
    return 0


def cmd_conformance(args) -> int:
    report = conformance_selftest(args.base_url, args.fixtures)
    print(report.render())
    return 0 if report.passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="audiopedia-server")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the reference server with stub backends")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument(
        "--backend",
        action="append",
        help="real-model hook as role=module:callable (repeatable)",
    )
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("conformance", help="replay the golden fixtures against a server")
    p.add_argument("--base-url", required=True)
    p.add_argument("--fixtures", default=str(DEFAULT_FIXTURE_DIR))
    p.set_defaults(func=cmd_conformance)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, ImportError, AttributeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
