"""Triplet knowledge base: ingest, validation, and per-entity knowledge views.

The store groups (subject, relation, object) facts by subject entity,
frames them into knowledge sentences, and exposes the three knowledge
views used throughout the toolkit: entity name only, a seeded fraction of
the sentences, or all of them.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


class KBError(ValueError):
    pass


class EmptyInput(KBError):
    pass


class MalformedRow(KBError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnknownEntity(KBError):
    pass


_FORBIDDEN_CHARS = ("\t", "\n", "\r")


@dataclass(frozen=True)
class Triplet:
    """One (subject, relation, object) knowledge fact."""

    subject: str
    relation: str
    object: str

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.subject, self.relation, self.object)


def canonical_name(name: str) -> str:
    """Case-folded, whitespace-collapsed form used for entity identity."""
    return " ".join(name.split()).casefold()


def stable_seed(*parts: object) -> int:
    """Platform-stable integer seed derived from the given parts."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class IngestStats:
    rows: int = 0
    entities: int = 0
    triplets: int = 0
    duplicates_dropped: int = 0
    comments_skipped: int = 0


@dataclass(frozen=True)
class KnowledgeSource:
    """How much entity knowledge is exposed: name only, a fraction, or all."""

    variant: str  # "name" | "partial" | "full"
    fraction: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.variant not in ("name", "partial", "full"):
            raise ValueError(f"unknown knowledge source variant {self.variant!r}")
        if self.variant == "partial" and not 0.0 < self.fraction < 1.0:
            raise ValueError("partial fraction must be strictly between 0 and 1")

    @classmethod
    def name_only(cls) -> "KnowledgeSource":
        return cls("name")

    @classmethod
    def partial(cls, fraction: float, seed: int = 0) -> "KnowledgeSource":
        return cls("partial", fraction=fraction, seed=seed)

    @classmethod
    def full(cls) -> "KnowledgeSource":
        return cls("full")

    @classmethod
    def parse(cls, text: str) -> "KnowledgeSource":
        """Parse CLI notation: ``name``, ``full`` or ``partial=0.2[:seed]``."""
        text = text.strip().lower()
        if text in ("name", "entity-name"):
            return cls.name_only()
        if text == "full":
            return cls.full()
        if text.startswith("partial="):
            body = text[len("partial=") :]
            frac_s, _, seed_s = body.partition(":")
            return cls.partial(float(frac_s), int(seed_s) if seed_s else 0)
        raise ValueError(f"cannot parse knowledge source {text!r}")

    @property
    def label(self) -> str:
        if self.variant == "name":
            return "name"
        if self.variant == "full":
            return "full"
        return f"partial={self.fraction:g}:{self.seed}"


class KnowledgeBase:
    """Immutable-after-ingest store of triplets grouped by subject entity.

    Entity ids are dense 0..n-1 in first-seen order; entity names are
    unique under ``canonical_name`` with the first surface form kept.
    """

    def __init__(
        self,
        entity_names: list[str],
        triplets_by_entity: list[list[Triplet]],
        stats: IngestStats | None = None,
    ) -> None:
        self.entity_names = entity_names
        self.triplets_by_entity = triplets_by_entity
        self.stats = stats or IngestStats(
            entities=len(entity_names),
            triplets=sum(len(ts) for ts in triplets_by_entity),
        )
        self._id_by_canonical = {canonical_name(n): i for i, n in enumerate(entity_names)}

    def __len__(self) -> int:
        return len(self.entity_names)

    def entity_ids(self) -> range:
        return range(len(self.entity_names))

    def entity_name(self, entity_id: int) -> str:
        self._check(entity_id)
        return self.entity_names[entity_id]

    def entity_id(self, name: str) -> int:
        key = canonical_name(name)
        if key not in self._id_by_canonical:
            raise UnknownEntity(f"no entity named {name!r}")
        return self._id_by_canonical[key]

    def triplets_of(self, entity_id: int) -> list[Triplet]:
        self._check(entity_id)
        return list(self.triplets_by_entity[entity_id])

    def all_triplets(self) -> list[Triplet]:
        return [t for ts in self.triplets_by_entity for t in ts]

    def _check(self, entity_id: int) -> None:
        if not 0 <= entity_id < len(self.entity_names):
            raise UnknownEntity(f"entity id {entity_id} out of range")

    def to_json(self) -> str:
        """Deterministic serialization: same ingest input, same bytes."""
        payload = {
            "entities": self.entity_names,
            "triplets": [
                [(t.subject, t.relation, t.object) for t in ts]
                for ts in self.triplets_by_entity
            ],
        }
        return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "KnowledgeBase":
        payload = json.loads(text)
        triplets = [[Triplet(*row) for row in ts] for ts in payload["triplets"]]
        return cls(list(payload["entities"]), triplets)


def _validate_fields(row_no: int, fields: Sequence[str]) -> tuple[str, str, str]:
    if len(fields) != 3:
        raise MalformedRow(row_no, f"expected 3 fields, got {len(fields)}")
    cleaned = []
    for name, value in zip(("subject", "relation", "object"), fields):
        if value is None:
            raise MalformedRow(row_no, f"missing {name}")
        value = str(value).strip()
        if not value:
            raise MalformedRow(row_no, f"empty {name}")
        if any(ch in value for ch in _FORBIDDEN_CHARS):
            raise MalformedRow(row_no, f"{name} contains a record separator")
        cleaned.append(value)
    return cleaned[0], cleaned[1], cleaned[2]


def ingest_triplets(records: Iterable[Sequence[str]]) -> KnowledgeBase:
    """Build a KnowledgeBase from (subject, relation, object) rows.

    Rows are grouped by subject entity in first-seen order; duplicate
    triplets (all three fields identical after canonicalization of the
    subject) are dropped, keeping the first occurrence.
    """
    entity_names: list[str] = []
    triplets_by_entity: list[list[Triplet]] = []
    id_by_canonical: dict[str, int] = {}
    seen: set[tuple[str, str, str]] = set()
    stats = IngestStats()

    for row_no, fields in enumerate(records, start=1):
        stats.rows += 1
        subject, relation, obj = _validate_fields(row_no, fields)
        key = canonical_name(subject)
        if key not in id_by_canonical:
            id_by_canonical[key] = len(entity_names)
            entity_names.append(subject)
            triplets_by_entity.append([])
        eid = id_by_canonical[key]
        canonical_subject = entity_names[eid]
        dedup_key = (key, relation, obj)
        if dedup_key in seen:
            stats.duplicates_dropped += 1
            continue
        seen.add(dedup_key)
        triplets_by_entity[eid].append(Triplet(canonical_subject, relation, obj))
        stats.triplets += 1

    if stats.rows == 0:
        raise EmptyInput("no triplet rows in input")
    stats.entities = len(entity_names)
    return KnowledgeBase(entity_names, triplets_by_entity, stats)


def parse_kb_lines(lines: Iterable[str]) -> KnowledgeBase:
    """Parse UTF-8 lines: TSV rows or JSON records, one triplet per line.

    Lines starting with ``#`` and blank lines are skipped.
    """
    records: list[tuple[int, Sequence[str]]] = []
    comments = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if line.lstrip().startswith("#"):
            comments += 1
            continue
        if line.lstrip().startswith("{"):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRow(line_no, f"invalid JSON record: {exc}") from exc
            fields = tuple(obj.get(k) for k in ("subject", "relation", "object"))
            if any(f is None for f in fields):
                raise MalformedRow(line_no, "JSON record missing subject/relation/object")
            records.append((line_no, fields))
        else:
            records.append((line_no, line.split("\t")))

    # Re-validate with original line numbers so errors point at the file.
    entity_rows = []
    for line_no, fields in records:
        entity_rows.append(_validate_fields(line_no, fields))
    if not entity_rows:
        raise EmptyInput("no triplet rows in input")
    kb = ingest_triplets(entity_rows)
    kb.stats.comments_skipped = comments
    return kb


def load_kb(path: str | Path) -> KnowledgeBase:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kb_lines(fh)


def frame_knowledge_sentences(kb: KnowledgeBase, entity_id: int) -> list[str]:
    """One sentence per triplet: ``subject relation object.`` in storage order."""
    return [f"{t.subject} {t.relation} {t.object}." for t in kb.triplets_of(entity_id)]


def knowledge_view(kb: KnowledgeBase, entity_id: int, source: KnowledgeSource) -> str:
    """Render the entity's knowledge under the given source.

    name: the entity name alone. partial: a seeded, order-preserving
    sample of ceil(fraction * m) framed sentences. full: every framed
    sentence. Multi-sentence views join sentences with single spaces.
    """
    if source.variant == "name":
        return kb.entity_name(entity_id)
    sentences = frame_knowledge_sentences(kb, entity_id)
    if source.variant == "full":
        return " ".join(sentences)
    m = len(sentences)
    if m == 0:
        return ""
    k = math.ceil(source.fraction * m)
    rng = random.Random(stable_seed("knowledge_view", source.seed, entity_id))
    chosen = sorted(rng.sample(range(m), k))
    return " ".join(sentences[i] for i in chosen)
