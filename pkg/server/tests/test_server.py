import base64
import json
import threading
import urllib.error
import urllib.request

import pytest

from audiopedia_server.app import ServerConfig, make_server
from audiopedia_server.backends import (
    BackendError,
    BackendRegistry,
    answer_from_prompt,
    char_count_encode,
    echo_asr,
    hash_tts,
    mock_answer,
)


@pytest.fixture()
def server():
    srv = make_server(ServerConfig(port=0))
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def _post(base_url, path, payload):
    body = json.dumps(payload).encode("utf-8")
    request = urllib.request.Request(
        base_url + path, data=body, headers={"Content-Type": "application/json"}
    )
    with urllib.request.urlopen(request, timeout=5) as response:
        return response.status, json.loads(response.read().decode("utf-8"))


def _get(base_url, path):
    with urllib.request.urlopen(base_url + path, timeout=5) as response:
        return response.status, json.loads(response.read().decode("utf-8"))


# ---------------------------------------------------------------------------
# stub backends as pure functions

def test_echo_asr_text_proxy():
    assert echo_asr({"audio_ref": "text-proxy:hello"}) == {"text": "hello"}


def test_echo_asr_inline_payload():
    payload = base64.b64encode(b"spoken words").decode()
    assert echo_asr({"audio_b64": payload}) == {"text": "spoken words"}


def test_echo_asr_rejects_opaque_refs():
    with pytest.raises(BackendError):
        echo_asr({"audio_ref": "clip.wav"})


def test_hash_tts_deterministic():
    a, b = hash_tts({"text": "hello"}), hash_tts({"text": "hello"})
    assert a == b
    assert a["audio_ref"].startswith("tts:")
    with pytest.raises(BackendError):
        hash_tts({"text": ""})


def test_char_count_encode_shape():
    out = char_count_encode({"texts": ["ab", "ab"]})
    assert out["dim"] == 36
    assert out["vectors"][0] == out["vectors"][1]
    assert out["vectors"][0][0] == 1.0 and out["vectors"][0][1] == 1.0
    with pytest.raises(BackendError):
        char_count_encode({"texts": []})


def test_mock_answer_modes():
    knowledge = "Knowledge:\nSubway established in 1965. Subway serves salad and sandwich."
    prompt = f"instruction\n\n{knowledge}\n\nQuestion: When was Subway established in?"
    assert mock_answer({"prompt": prompt}) == {"text": "1965"}
    assert answer_from_prompt("instruction\n\nQuestion: anything?") == "unknown"


# ---------------------------------------------------------------------------
# HTTP layer

def test_health_lists_roles(server):
    status, payload = _get(server.base_url, "/v1/health")
    assert status == 200
    assert payload == {"status": "ok", "roles": ["asr", "tts", "encode", "answer"]}


def test_asr_round_trip(server):
    status, payload = _post(server.base_url, "/v1/asr", {"audio_ref": "text-proxy:hi"})
    assert (status, payload) == (200, {"text": "hi"})


def test_bad_request_maps_to_400(server):
    with pytest.raises(urllib.error.HTTPError) as err:
        _post(server.base_url, "/v1/tts", {"text": ""})
    assert err.value.code == 400
    assert "error" in json.loads(err.value.read().decode())


def test_unknown_route_404(server):
    with pytest.raises(urllib.error.HTTPError) as err:
        _post(server.base_url, "/v1/nope", {})
    assert err.value.code == 404


def test_invalid_json_400(server):
    request = urllib.request.Request(
        server.base_url + "/v1/asr",
        data=b"{not json",
        headers={"Content-Type": "application/json"},
    )
    with pytest.raises(urllib.error.HTTPError) as err:
        urllib.request.urlopen(request, timeout=5)
    assert err.value.code == 400


def test_backend_crash_maps_to_500(server):
    def broken(payload):
        raise RuntimeError("backend exploded")

    server.registry.register("asr", broken)
    with pytest.raises(urllib.error.HTTPError) as err:
        _post(server.base_url, "/v1/asr", {"audio_ref": "text-proxy:x"})
    assert err.value.code == 500


def test_registry_real_model_hook_overrides_stub():
    registry = BackendRegistry()
    registry.register("answer", lambda payload: {"text": "real model output"})
    assert registry.get("answer")({}) == {"text": "real model output"}
    assert registry.roles == ["asr", "tts", "encode", "answer"]
    with pytest.raises(ValueError):
        registry.register("nope", lambda p: p)


def test_concurrent_requests(server):
    results = []

    def call(i):
        _, payload = _post(server.base_url, "/v1/asr", {"audio_ref": f"text-proxy:m{i}"})
        results.append(payload["text"])

    threads = [threading.Thread(target=call, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(results) == [f"m{i}" for i in range(8)]
