"""Conformance self-test: replay the shared golden fixtures over HTTP.

The fixture files are the single source of truth for stub behavior; the
toolkit's client tests replay the same files against its in-process
backends. Failures are enumerated in the returned report, never raised.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

# repo layout: <root>/server/src/audiopedia_server/conformance.py, fixtures at <root>/fixtures
DEFAULT_FIXTURE_DIR = Path(__file__).resolve().parents[3] / "fixtures" / "protocol"


@dataclass
class FixtureResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ConformanceReport:
    results: list[FixtureResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def render(self) -> str:
        lines = [
            f"[{'PASS' if r.passed else 'FAIL'}] {r.name}" + (f"  ({r.detail})" if r.detail else "")
            for r in self.results
        ]
        verdict = "all fixtures passed" if self.passed else "FAILURES PRESENT"
        lines.append(f"{sum(r.passed for r in self.results)}/{len(self.results)} fixtures passed: {verdict}")
        return "\n".join(lines)


def load_fixtures(fixture_dir: str | Path) -> list[dict]:
    fixture_dir = Path(fixture_dir)
    fixtures = [
        json.loads(path.read_text(encoding="utf-8"))
        for path in sorted(fixture_dir.glob("*.json"))
    ]
    if not fixtures:
        raise FileNotFoundError(f"no fixtures under {fixture_dir}")
    return fixtures


def _call(base_url: str, fixture: dict) -> tuple[int, dict]:
    url = base_url.rstrip("/") + fixture["endpoint"]
    if fixture.get("method", "POST") == "GET":
        request = urllib.request.Request(url)
    else:
        body = json.dumps(fixture.get("request", {})).encode("utf-8")
        request = urllib.request.Request(
            url, data=body, headers={"Content-Type": "application/json"}
        )
    try:
        with urllib.request.urlopen(request, timeout=10) as response:
            return response.status, json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        try:
            payload = json.loads(exc.read().decode("utf-8"))
        except Exception:
            payload = {}
        return exc.code, payload


def run_fixture(base_url: str, fixture: dict) -> FixtureResult:
    name = fixture.get("name", fixture["endpoint"])
    try:
        status, payload = _call(base_url, fixture)
    except Exception as exc:
        return FixtureResult(name, False, f"transport error: {exc}")

    if fixture.get("expect_error"):
        wanted = fixture.get("status", 400)
        if status != wanted:
            return FixtureResult(name, False, f"expected HTTP {wanted}, got {status}")
        if "error" not in payload:
            return FixtureResult(name, False, "error response lacks an 'error' field")
        return FixtureResult(name, True)

    if status != 200:
        return FixtureResult(name, False, f"HTTP {status}: {payload}")
    if payload != fixture["expect"]:
        return FixtureResult(name, False, f"response mismatch: {payload!r}")
    return FixtureResult(name, True)


def conformance_selftest(
    base_url: str, fixture_dir: str | Path = DEFAULT_FIXTURE_DIR
) -> ConformanceReport:
    report = ConformanceReport()
    for fixture in load_fixtures(fixture_dir):
        report.results.append(run_fixture(base_url, fixture))
    return report
