"""Audio entity linking: rank per-entity knowledge against a transcript.

An EntityIndex holds each entity's knowledge text under a chosen source
plus its embedding. Linking encodes the transcript with the index's
encoder, scores every entry by cosine similarity, and picks the top
entity (ties break by ascending entity id). Audio comes in either as a
real reference handled by an ASR adapter or as a ``text-proxy:`` ref that
already carries its sentence.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Callable, Sequence

from .kb import KnowledgeBase, KnowledgeSource, UnknownEntity, knowledge_view, stable_seed
from .textenc import TfidfEncoder, Vector, cosine

TEXT_PROXY_PREFIX = "text-proxy:"

_LOWERCASE = "abcdefghijklmnopqrstuvwxyz"


class LinkingError(RuntimeError):
    pass


class EmptyKnowledgeBase(LinkingError):
    pass


class AdapterUnavailable(LinkingError):
    pass


class TranscriptionFailed(LinkingError):
    def __init__(self, ref: str, cause: str) -> None:
        super().__init__(f"transcription failed for {ref!r}: {cause}")
        self.ref = ref


def make_text_proxy_ref(sentence: str) -> str:
    return TEXT_PROXY_PREFIX + sentence


def is_text_proxy_ref(ref: str) -> bool:
    return ref.startswith(TEXT_PROXY_PREFIX)


@dataclass(frozen=True)
class IndexEntry:
    entity_id: int
    knowledge_text: str
    vector: Vector


@dataclass
class EntityIndex:
    """Per-entity knowledge texts and embeddings under one knowledge source."""

    source: KnowledgeSource
    entries: list[IndexEntry]
    encoder: TfidfEncoder

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, entity_id: int) -> IndexEntry:
        return self.entries[entity_id]


@dataclass
class LinkResult:
    """Ranked linking decision for one transcript."""

    chosen: int
    linked_knowledge: str
    scores: list[tuple[int, float]]  # every entity, sorted descending
    transcript: str


def build_entity_index(
    kb: KnowledgeBase,
    source: KnowledgeSource,
    encoder: TfidfEncoder | None = None,
) -> EntityIndex:
    """Encode every entity's knowledge view; the encoder fits on those texts only."""
    if len(kb) == 0:
        raise EmptyKnowledgeBase("cannot index an empty knowledge base")
    texts = [knowledge_view(kb, eid, source) for eid in kb.entity_ids()]
    encoder = encoder or TfidfEncoder()
    encoder.fit(texts)
    vectors = encoder.encode_many(texts)
    entries = [
        IndexEntry(eid, text, vec)
        for eid, text, vec in zip(kb.entity_ids(), texts, vectors)
    ]
    return EntityIndex(source=source, entries=entries, encoder=encoder)


def noise_inject(text: str, rate: float, seed: int = 0) -> str:
    """Replace each character with a seeded random lowercase letter with
    probability ``rate``; rate 0 is the identity."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("noise rate must be within [0, 1]")
    if rate == 0.0 or not text:
        return text
    rng = random.Random(stable_seed("noise", seed))
    out = []
    for ch in text:
        if rng.random() < rate:
            out.append(rng.choice(_LOWERCASE))
        else:
            out.append(ch)
    return "".join(out)


def transcribe(
    audio_ref: str,
    asr: Callable[[str], str] | None = None,
    noise_rate: float = 0.0,
    noise_seed: int = 0,
) -> str:
    """Turn an audio ref into text.

    text-proxy refs return their embedded sentence (optionally noised);
    real refs go through the ASR adapter verbatim.
    """
    if is_text_proxy_ref(audio_ref):
        text = audio_ref[len(TEXT_PROXY_PREFIX):]
        if noise_rate > 0.0:
            text = noise_inject(text, noise_rate, noise_seed)
        return text
    if asr is None:
        raise AdapterUnavailable(f"no ASR adapter configured for {audio_ref!r}")
    try:
        return asr(audio_ref)
    except Exception as exc:
        raise TranscriptionFailed(audio_ref, str(exc)) from exc


def link(transcript: str, index: EntityIndex) -> LinkResult:
    """Score the transcript against every index entry; top-1 wins.

    Ties (including the all-zero case of an empty transcript) break by
    ascending entity id.
    """
    if len(index) == 0:
        raise EmptyKnowledgeBase("cannot link against an empty index")
    query = index.encoder.encode(transcript)
    scored = [(e.entity_id, cosine(query, e.vector)) for e in index.entries]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    chosen = scored[0][0]
    return LinkResult(
        chosen=chosen,
        linked_knowledge=index.entry(chosen).knowledge_text,
        scores=scored,
        transcript=transcript,
    )


def link_many(transcripts: Sequence[str], index: EntityIndex) -> list[LinkResult]:
    return [link(t, index) for t in transcripts]


def link_oracle(index: EntityIndex, gold_entity: int) -> LinkResult:
    """Ground-truth linking: bypass ranking and return the gold entry."""
    if not 0 <= gold_entity < len(index):
        raise UnknownEntity(f"gold entity {gold_entity} not in index")
    entry = index.entry(gold_entity)
    return LinkResult(
        chosen=gold_entity,
        linked_knowledge=entry.knowledge_text,
        scores=[(gold_entity, 1.0)],
        transcript="",
    )


def export_link_records(
    sample_id: str,
    results: Sequence[LinkResult],
    kb: KnowledgeBase,
    top_k: int = 5,
) -> list[str]:
    """Line-delimited linking trace records for one sample."""
    lines = []
    for idx, res in enumerate(results):
        record = {
            "sample_id": sample_id,
            "input_index": idx,
            "chosen_entity_name": kb.entity_name(res.chosen),
            "scores": [
                {"entity": kb.entity_name(eid), "score": score}
                for eid, score in res.scores[:top_k]
            ],
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    return lines
