"""Wire clients for the four external model roles, plus local stand-ins.

All four roles (asr, tts, encode, answer) speak one JSON-over-HTTP
protocol under /v1. Local deterministic backends implement the same
contracts in-process so every pipeline runs with no server at all:
an echo ASR, a content-hash TTS, a bag-of-characters encoder, and the
mock-oracle answerer.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .linking import TEXT_PROXY_PREFIX, AdapterUnavailable, is_text_proxy_ref
from .pipeline import mock_oracle_answer
from .textenc import Vector

ROLES = ("asr", "tts", "encode", "answer")

CHAR_DIMS = "abcdefghijklmnopqrstuvwxyz0123456789"


class AdapterError(RuntimeError):
    pass


class Timeout(AdapterError):
    pass


class ProtocolError(AdapterError):
    def __init__(self, status: int, body: str) -> None:
        super().__init__(f"HTTP {status}: {body}")
        self.status = status
        self.body = body


class ExhaustedRetries(AdapterError):
    pass


class DimensionMismatch(AdapterError):
    pass


@dataclass
class AdapterEndpoint:
    role: str
    base_url: str
    timeout_ms: int = 10_000
    attempts: int = 3
    backoff_base_s: float = 0.1
    max_in_flight: int = 4
    _gate: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown adapter role {self.role!r}")
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.attempts < 1:
            raise ValueError("attempts must be at least 1")
        self._gate = threading.Semaphore(self.max_in_flight)


def _post(endpoint: AdapterEndpoint, path: str, payload: dict) -> dict:
    """POST JSON with bounded retries; transient failures back off and retry."""
    body = json.dumps(payload, ensure_ascii=False, sort_keys=True).encode("utf-8")
    url = endpoint.base_url.rstrip("/") + path
    last_error: Exception | None = None
    for attempt in range(endpoint.attempts):
        if attempt:
            time.sleep(endpoint.backoff_base_s * (2 ** (attempt - 1)))
        try:
            request = urllib.request.Request(
                url, data=body, headers={"Content-Type": "application/json"}
            )
            with endpoint._gate:
                with urllib.request.urlopen(
                    request, timeout=endpoint.timeout_ms / 1000.0
                ) as response:
                    return json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            detail = exc.read().decode("utf-8", "replace")
            try:
                detail = json.loads(detail).get("error", detail)
            except (json.JSONDecodeError, AttributeError):
                pass
            if 500 <= exc.code < 600:  # transient server side
                last_error = ProtocolError(exc.code, detail)
                continue
            raise ProtocolError(exc.code, detail) from exc
        except TimeoutError as exc:
            last_error = Timeout(f"request to {url} timed out")
            continue
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                last_error = Timeout(f"request to {url} timed out")
            else:
                last_error = AdapterError(f"request to {url} failed: {exc.reason}")
            continue
    if isinstance(last_error, Timeout):
        raise last_error
    raise ExhaustedRetries(
        f"{endpoint.attempts} attempts to {url} failed: {last_error}"
    ) from last_error


def asr_call(endpoint: AdapterEndpoint, audio_ref: str, audio_b64: str | None = None) -> str:
    """Transcribe one audio reference (or small inline base64 clip)."""
    if endpoint.role != "asr":
        raise ValueError(f"endpoint role {endpoint.role!r} is not asr")
    payload = {"audio_b64": audio_b64} if audio_b64 is not None else {"audio_ref": audio_ref}
    return str(_post(endpoint, "/v1/asr", payload)["text"])


def tts_call(endpoint: AdapterEndpoint, text: str) -> str:
    """Synthesize text; returns the service's audio reference."""
    if endpoint.role != "tts":
        raise ValueError(f"endpoint role {endpoint.role!r} is not tts")
    return str(_post(endpoint, "/v1/tts", {"text": text})["audio_ref"])


def encode_call(endpoint: AdapterEndpoint, texts: Sequence[str]) -> list[Vector]:
    """Encode a batch of texts; vectors must share one dimensionality."""
    if endpoint.role != "encode":
        raise ValueError(f"endpoint role {endpoint.role!r} is not encode")
    if not texts:
        raise AdapterError("encode_call needs at least one text")
    payload = _post(endpoint, "/v1/encode", {"texts": list(texts)})
    vectors = payload["vectors"]
    dim = payload.get("dim", len(vectors[0]) if vectors else 0)
    if any(len(v) != dim for v in vectors):
        raise DimensionMismatch(f"service returned ragged vectors (dim={dim})")
    if len(vectors) != len(texts):
        raise DimensionMismatch(
            f"{len(vectors)} vectors for {len(texts)} texts"
        )
    return [Vector.from_dense(v) for v in vectors]


def answer_call(endpoint: AdapterEndpoint, prompt: str, audio_refs: Sequence[str]) -> str:
    """Request a generated answer; the text comes back verbatim."""
    if endpoint.role != "answer":
        raise ValueError(f"endpoint role {endpoint.role!r} is not answer")
    payload = {"prompt": prompt, "audio_refs": list(audio_refs)}
    return str(_post(endpoint, "/v1/answer", payload)["text"])


def health_call(base_url: str, timeout_ms: int = 5000) -> dict:
    """GET /v1/health; returns the status payload with the served roles."""
    url = base_url.rstrip("/") + "/v1/health"
    try:
        with urllib.request.urlopen(url, timeout=timeout_ms / 1000.0) as response:
            return json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        raise ProtocolError(exc.code, exc.read().decode("utf-8", "replace")) from exc
    except (TimeoutError, urllib.error.URLError) as exc:
        raise Timeout(f"health check of {url} failed: {exc}") from exc


# ---------------------------------------------------------------------------
# Local deterministic backends (same contracts as the wire stubs)

def local_asr(audio_ref: str, audio_b64: str | None = None) -> str:
    """Echo ASR: text-proxy refs return their sentence, inline payloads decode."""
    if audio_b64 is not None:
        return base64.b64decode(audio_b64).decode("utf-8")
    if is_text_proxy_ref(audio_ref):
        return audio_ref[len(TEXT_PROXY_PREFIX):]
    raise AdapterUnavailable(f"echo ASR cannot read {audio_ref!r}")


def local_tts(text: str) -> str:
    """Sentinel TTS ref derived from a content hash of the text."""
    if not text:
        raise ProtocolError(400, "tts text must be non-empty")
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return f"tts:{digest[:16]}"


def local_encode(texts: Sequence[str]) -> list[Vector]:
    """Bag-of-characters over [a-z0-9], fixed 36 dimensions."""
    vectors = []
    for text in texts:
        counts = [0.0] * len(CHAR_DIMS)
        for ch in text.lower():
            pos = CHAR_DIMS.find(ch)
            if pos >= 0:
                counts[pos] += 1.0
        vectors.append(Vector.from_dense(counts))
    return vectors


def local_answer(prompt: str, audio_refs: Sequence[str]) -> str:
    return mock_oracle_answer(prompt)


LOCAL_BACKENDS = {
    "asr": local_asr,
    "tts": local_tts,
    "encode": local_encode,
    "answer": local_answer,
}


# ---------------------------------------------------------------------------
# Endpoint configuration

ENDPOINTS_ENV_VAR = "AUDIOPEDIA_ENDPOINTS"

_DEFAULTS = {"timeout_ms": 10_000, "attempts": 3, "backoff_base_s": 0.1}


def load_endpoints(path: str | Path | None = None) -> dict[str, AdapterEndpoint]:
    """Read endpoint config (JSON per role) with environment override.

    The AUDIOPEDIA_ENDPOINTS variable, when set, replaces the path.
    Roles absent from the file fall back to local backends at call sites.
    """
    env_path = os.environ.get(ENDPOINTS_ENV_VAR)
    if env_path:
        path = env_path
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    endpoints = {}
    for role, cfg in raw.items():
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r} in endpoint config")
        if isinstance(cfg, str):
            cfg = {"base_url": cfg}
        endpoints[role] = AdapterEndpoint(
            role=role,
            base_url=cfg["base_url"],
            timeout_ms=int(cfg.get("timeout_ms", _DEFAULTS["timeout_ms"])),
            attempts=int(cfg.get("attempts", _DEFAULTS["attempts"])),
            backoff_base_s=float(cfg.get("backoff_base_s", _DEFAULTS["backoff_base_s"])),
        )
    return endpoints


class WireEncoder:
    """Remote text encoder with the same fit/encode surface as the built-in.

    Remote encoders are already trained, so fit is a no-op; texts are
    embedded by the service in one batch per call.
    """

    def __init__(self, endpoint: AdapterEndpoint) -> None:
        if endpoint.role != "encode":
            raise ValueError(f"endpoint role {endpoint.role!r} is not encode")
        self.endpoint = endpoint

    def fit(self, corpus: Sequence[str]) -> "WireEncoder":
        return self

    def encode(self, text: str) -> Vector:
        return encode_call(self.endpoint, [text])[0]

    def encode_many(self, texts: Sequence[str]) -> list[Vector]:
        return encode_call(self.endpoint, list(texts)) if texts else []


def wire_asr(endpoint: AdapterEndpoint):
    return lambda audio_ref: asr_call(endpoint, audio_ref)


def wire_tts(endpoint: AdapterEndpoint):
    return lambda text: tts_call(endpoint, text)


def wire_answerer(endpoint: AdapterEndpoint):
    return lambda prompt, audio_refs: answer_call(endpoint, prompt, audio_refs)
