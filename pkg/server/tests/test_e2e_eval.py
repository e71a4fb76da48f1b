"""End-to-end: the toolkit CLI evaluated against this server must reproduce
the report it produces with its in-process deterministic backends.

The toolkit is driven purely through its command line (its external
interface); only the answerer role is routed through the wire.
"""

import json
import subprocess
import sys
import threading
from pathlib import Path

import pytest

from audiopedia_server.app import ServerConfig, make_server

REPO_ROOT = Path(__file__).resolve().parents[2]
KB = REPO_ROOT / "src" / "audiopedia" / "data" / "fixture_kb.tsv"


@pytest.fixture()
def server():
    srv = make_server(ServerConfig(port=0))
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def _toolkit(*args):
    result = subprocess.run(
        [sys.executable, "-m", "audiopedia.cli", *args],
        capture_output=True,
        text=True,
        cwd=REPO_ROOT,
    )
    assert result.returncode == 0, result.stderr
    return result


def test_cmd_eval_against_server_matches_in_process(tmp_path, server):
    data = tmp_path / "data"
    _toolkit(
        "synth", "--kb", str(KB), "--task", "all", "--seed", "0",
        "--templates", "fixture", "--text-proxy", "--out", str(data),
    )

    endpoints = tmp_path / "endpoints.json"
    endpoints.write_text(json.dumps({"answer": {"base_url": server.base_url}}))

    outputs = {}
    for dataset in ("s_aqa", "m_aqa", "r_aqa"):
        local_out = tmp_path / "local" / dataset
        wire_out = tmp_path / "wire" / dataset
        common = [
            "eval", "--dataset", str(data / f"{dataset}.jsonl"), "--kb", str(KB),
            "--knowledge", "full", "--linking", "oracle",
        ]
        _toolkit(*common, "--out", str(local_out))
        _toolkit(*common, "--endpoints", str(endpoints), "--out", str(wire_out))
        outputs[dataset] = (local_out, wire_out)

    for dataset, (local_out, wire_out) in outputs.items():
        # per-sample answers and the rendered figure are byte-identical
        assert (local_out / "answers.jsonl").read_bytes() == (wire_out / "answers.jsonl").read_bytes()
        assert (local_out / "accuracy.png").read_bytes() == (wire_out / "accuracy.png").read_bytes()
        # reports agree on everything except the answerer backend echo
        local = json.loads((local_out / "report.json").read_text())
        wire = json.loads((wire_out / "report.json").read_text())
        assert local["config"].pop("answerer") == "mock-oracle"
        assert wire["config"].pop("answerer").startswith("http://")
        assert local == wire
        assert local["accuracy"][dataset] == 1.0


def test_primary_suite_needs_no_server():
    result = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "tests"],
        capture_output=True,
        text=True,
        cwd=REPO_ROOT,
    )
    assert result.returncode == 0, result.stdout + result.stderr
    assert "passed" in result.stdout
