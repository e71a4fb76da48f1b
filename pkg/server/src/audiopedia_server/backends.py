"""Deterministic stub backends plus the pluggable registry.

Stubs are pure functions of the request body: an echo ASR, a content-hash
TTS, a bag-of-characters encoder, and a mock answerer that reads the
answer out of the prompt's knowledge block. Their behavior is pinned by
the golden fixtures under fixtures/protocol/ at the repository root; the
toolkit's in-process backends satisfy the same fixtures.

Real model hooks register over the stubs via ``BackendRegistry.register``
(or a ``module:callable`` spec in the server config); nothing in the test
suite requires them.
"""

from __future__ import annotations

import base64
import hashlib
import re

TEXT_PROXY_PREFIX = "text-proxy:"
CHAR_DIMS = "abcdefghijklmnopqrstuvwxyz0123456789"
ROLES = ("asr", "tts", "encode", "answer")

REFUSAL = "unknown"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_YEAR_RE = re.compile(r"\b(\d{4})\b")

_COUNT_STOPWORDS = {
    "how", "many", "of", "these", "those", "do", "does", "did", "are", "is",
    "was", "were", "have", "has", "had", "the", "a", "an", "restaurants",
    "restaurant", "places", "place", "here", "there",
}

_BINARY_STARTERS = {
    "are", "is", "do", "does", "did", "was", "were", "can", "could", "will",
    "would", "have", "has", "had", "am",
}


class BackendError(ValueError):
    """Invalid request payload; maps to HTTP 400."""


# ---------------------------------------------------------------------------
# stub: echo ASR

def echo_asr(payload: dict) -> dict:
    audio_b64 = payload.get("audio_b64")
    if audio_b64 is not None:
        try:
            return {"text": base64.b64decode(audio_b64).decode("utf-8")}
        except Exception as exc:
            raise BackendError(f"cannot decode audio_b64: {exc}") from exc
    audio_ref = payload.get("audio_ref")
    if not isinstance(audio_ref, str):
        raise BackendError("asr needs audio_ref or audio_b64")
    if audio_ref.startswith(TEXT_PROXY_PREFIX):
        return {"text": audio_ref[len(TEXT_PROXY_PREFIX):]}
    raise BackendError(f"echo ASR cannot read {audio_ref!r}")


# ---------------------------------------------------------------------------
# stub: content-hash TTS

def hash_tts(payload: dict) -> dict:
    text = payload.get("text")
    if not text:
        raise BackendError("tts text must be non-empty")
    digest = hashlib.sha256(str(text).encode("utf-8")).hexdigest()
    return {"audio_ref": f"tts:{digest[:16]}"}


# ---------------------------------------------------------------------------
# stub: bag-of-characters encoder

def char_count_encode(payload: dict) -> dict:
    texts = payload.get("texts")
    if not isinstance(texts, list) or not texts:
        raise BackendError("encode needs a non-empty texts list")
    vectors = []
    for text in texts:
        counts = [0.0] * len(CHAR_DIMS)
        for ch in str(text).lower():
            pos = CHAR_DIMS.find(ch)
            if pos >= 0:
                counts[pos] += 1.0
        vectors.append(counts)
    return {"vectors": vectors, "dim": len(CHAR_DIMS)}


# ---------------------------------------------------------------------------
# stub: mock answerer over the rendered prompt

def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _normalize(text: str) -> str:
    return " ".join(text.split()).casefold()


def _split_sentences(block: str) -> list[str]:
    return [s for s in re.split(r"(?<=\.)\s+", block.strip()) if s]


def _parse_prompt(prompt: str) -> tuple[list[str], str]:
    marker = "\n\nQuestion: "
    pos = prompt.rfind(marker)
    if pos >= 0:
        question = prompt[pos + len(marker):].strip()
        head = prompt[:pos]
    elif prompt.startswith("Question: "):
        question = prompt[len("Question: "):].strip()
        head = ""
    else:
        return [], prompt.strip()
    kpos = head.find("Knowledge:\n")
    if kpos < 0:
        return [], question
    blocks = head[kpos + len("Knowledge:\n"):].split("\n\n")
    return [b.strip() for b in blocks if b.strip()], question


def _extract_object(block: str, question: str) -> str | None:
    qtokens = set(_tokenize(question))
    sentences = _split_sentences(block)
    if not sentences:
        return None
    best, best_score = sentences[0], -1
    for sent in sentences:
        score = len(set(_tokenize(sent)) & qtokens)
        if score > best_score:
            best, best_score = sent, score
    spans = [(m.group().lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(best)]
    i = len(spans) - 1
    while i >= 0 and spans[i][0] not in qtokens:
        i -= 1
    run = spans[i + 1:]
    if not run:
        return None
    return best[run[0][1]:run[-1][2]]


def _token_matches(wanted: str, present: set[str]) -> bool:
    return wanted in present or wanted + "s" in present or (
        wanted.endswith("s") and wanted[:-1] in present
    )


def _covers_question(block: str, question: str) -> bool:
    required = [t for t in _tokenize(question) if t not in _COUNT_STOPWORDS]
    for sent in _split_sentences(block):
        present = set(_tokenize(sent))
        if all(_token_matches(r, present) for r in required):
            return True
    return False


def _objects_equivalent(a: str, b: str, decade: bool) -> bool:
    if decade:
        ya, yb = _YEAR_RE.search(a), _YEAR_RE.search(b)
        if ya and yb:
            return int(ya.group(1)) // 10 == int(yb.group(1)) // 10
    return _normalize(a) == _normalize(b)


def answer_from_prompt(prompt: str) -> str:
    blocks, question = _parse_prompt(prompt)
    if not blocks or not question:
        return REFUSAL
    qnorm = _normalize(question)
    qtokens = _tokenize(question)

    if qnorm.startswith("how many"):
        return str(sum(1 for b in blocks if _covers_question(b, question)))

    if qtokens and qtokens[0] in _BINARY_STARTERS:
        extracted = [_extract_object(b, question) for b in blocks]
        if any(e is None for e in extracted):
            return REFUSAL
        decade = "same decade" in qnorm
        first = extracted[0]
        same = all(_objects_equivalent(first, other, decade) for other in extracted[1:])
        return "Yes" if same else "No"

    span = _extract_object(" ".join(blocks), question)
    return span if span is not None else REFUSAL


def mock_answer(payload: dict) -> dict:
    prompt = payload.get("prompt")
    if not isinstance(prompt, str):
        raise BackendError("answer needs a prompt string")
    return {"text": answer_from_prompt(prompt)}


# ---------------------------------------------------------------------------
# registry

STUB_BACKENDS = {
    "asr": echo_asr,
    "tts": hash_tts,
    "encode": char_count_encode,
    "answer": mock_answer,
}


class BackendRegistry:
    """Role to backend mapping; stubs are registered by default."""

    def __init__(self) -> None:
        self._backends = dict(STUB_BACKENDS)

    def register(self, role: str, backend) -> None:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        self._backends[role] = backend

    def get(self, role: str):
        return self._backends[role]

    @property
    def roles(self) -> list[str]:
        return [r for r in ROLES if r in self._backends]
