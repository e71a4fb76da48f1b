"""Benchmark dataset generation from a triplet knowledge base.

Three task families are generated:

* s_aqa: open-ended questions about a single entity. One triplet is held
  out to frame (question, answer); the rest become input sentences.
* m_aqa: binary questions over two entities whose triplets share a
  relation. "Yes" samples have equivalent objects under the effective
  equivalence rule, "No" samples do not.
* r_aqa: count questions over a pool where only some items are relevant.
  Relevant items share (relation, object); distractors differ from every
  relevant triplet in subject, relation and object.

Generation is a pure function of (kb, config): the same seed always
produces the same samples.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .kb import KnowledgeBase, Triplet, stable_seed
from .linking import make_text_proxy_ref, AdapterUnavailable
from .textenc import normalize_text

TASK_S = "s_aqa"
TASK_M = "m_aqa"
TASK_R = "r_aqa"
TASKS = (TASK_S, TASK_M, TASK_R)

ANSWER_TYPES = {TASK_S: "open-ended", TASK_M: "binary", TASK_R: "counts"}


class SynthError(ValueError):
    pass


class MissingTemplate(SynthError):
    def __init__(self, relation: str, task: str) -> None:
        super().__init__(f"no {task} template for relation {relation!r}")
        self.relation = relation
        self.task = task


class AnswerLeakage(SynthError):
    pass


class NoEligibleEntity(SynthError):
    pass


class NoEligiblePair(SynthError):
    pass


class InsufficientDistractors(SynthError):
    pass


class IoFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Object equivalence rules

EXACT_OBJECT = "exact-object"
DECADE_BUCKET = "decade-bucket"

_YEAR_RE = re.compile(r"\b(\d{4})\b")


def _first_year(text: str) -> int | None:
    m = _YEAR_RE.search(text)
    return int(m.group(1)) if m else None


def objects_equivalent(a: str, b: str, rule: str | dict = EXACT_OBJECT) -> bool:
    """Compare two object values under a named equivalence rule.

    exact-object: normalized string equality. decade-bucket: objects that
    both contain a 4-digit year compare by decade, anything else falls
    back to exact. A dict is a custom table mapping normalized objects to
    class labels (missing entries fall back to exact).
    """
    na, nb = normalize_text(a), normalize_text(b)
    if isinstance(rule, dict):
        ca, cb = rule.get(na), rule.get(nb)
        if ca is not None and cb is not None:
            return ca == cb
        return na == nb
    if rule == DECADE_BUCKET:
        ya, yb = _first_year(a), _first_year(b)
        if ya is not None and yb is not None:
            return ya // 10 == yb // 10
        return na == nb
    if rule == EXACT_OBJECT:
        return na == nb
    raise SynthError(f"unknown equivalence rule {rule!r}")


# ---------------------------------------------------------------------------
# Question templates

DEMONYMS = {
    "japan": "Japanese",
    "united states": "American",
    "greece": "Greek",
    "mexico": "Mexican",
    "canada": "Canadian",
    "australia": "Australian",
    "italy": "Italian",
    "france": "French",
    "india": "Indian",
    "germany": "German",
    "spain": "Spanish",
    "sweden": "Swedish",
}


@dataclass(frozen=True)
class RelationTemplates:
    """Question templates for one relation, per task.

    Slots: ``{subject}`` (s_aqa), ``{demonym}``/``{object}`` (m_aqa and
    r_aqa, filled from the first source triplet's object). ``equivalence``
    overrides the config-wide Yes/No rule for this relation.
    """

    s_aqa: str | None = None
    m_aqa: str | None = None
    r_aqa: str | None = None
    equivalence: str | None = None


def default_template_table() -> dict[str, RelationTemplates]:
    """Templates for the stock relations; other relations need user entries."""
    return {
        "established in": RelationTemplates(
            s_aqa="When was {subject} established in?",
            m_aqa="Are these restaurants established in the same decade?",
            r_aqa="How many of these restaurants were established in {object}?",
            equivalence=DECADE_BUCKET,
        ),
        "serves": RelationTemplates(
            s_aqa="What is it that {subject} serves?",
            m_aqa="Are the items each serves the same?",
            r_aqa="How many of these restaurants serve {object}?",
        ),
        "origin country": RelationTemplates(
            s_aqa="What is the origin country of {subject}?",
            m_aqa="Are these {demonym} restaurants?",
            r_aqa="How many of these restaurants have origin country {object}?",
        ),
    }


def templates_from_dict(raw: dict) -> dict[str, RelationTemplates]:
    return {
        relation: RelationTemplates(
            s_aqa=entry.get("s_aqa"),
            m_aqa=entry.get("m_aqa"),
            r_aqa=entry.get("r_aqa"),
            equivalence=entry.get("equivalence"),
        )
        for relation, entry in raw.items()
    }


def load_template_table(path: str | Path) -> dict[str, RelationTemplates]:
    with open(path, "r", encoding="utf-8") as fh:
        return templates_from_dict(json.load(fh))


def _demonym(obj: str) -> str:
    return DEMONYMS.get(normalize_text(obj), obj)


def render_question(
    template_table: dict[str, RelationTemplates],
    triplets: Triplet | Sequence[Triplet],
    task_kind: str,
) -> str:
    """Fill the relation's template for the task.

    s_aqa questions must never contain the answer object; a filled
    template that does is rejected with AnswerLeakage.
    """
    if isinstance(triplets, Triplet):
        triplets = (triplets,)
    first = triplets[0]
    entry = template_table.get(first.relation)
    template = getattr(entry, task_kind, None) if entry else None
    if not template:
        raise MissingTemplate(first.relation, task_kind)
    question = template.format(
        subject=first.subject,
        object=first.object,
        demonym=_demonym(first.object),
        relation=first.relation,
    )
    if task_kind == TASK_S and normalize_text(first.object) in normalize_text(question):
        raise AnswerLeakage(
            f"question {question!r} leaks the answer {first.object!r}"
        )
    return question


def effective_equivalence(
    template_table: dict[str, RelationTemplates], relation: str, default: str | dict
) -> str | dict:
    entry = template_table.get(relation)
    if entry is not None and entry.equivalence is not None:
        return entry.equivalence
    return default


# ---------------------------------------------------------------------------
# Sample types

@dataclass
class SAQASample:
    id: str
    input_sentences: list[str]
    audio_refs: list[str]
    question: str
    answer: str
    gold_entity: int
    excluded_triplet: Triplet
    gold_entity_name: str = ""

    task = TASK_S


@dataclass
class MAQAInput:
    sentence: str
    audio_ref: str
    gold_entity: int
    gold_entity_name: str
    source_triplet: Triplet


@dataclass
class MAQASample:
    id: str
    inputs: list[MAQAInput]
    question: str
    answer: str  # "Yes" | "No"
    equivalence: str = EXACT_OBJECT

    task = TASK_M


@dataclass
class RAQAPoolItem:
    sentence: str
    audio_ref: str
    gold_entity: int
    gold_entity_name: str
    relevant: bool
    source_triplet: Triplet


@dataclass
class RAQASample:
    id: str
    pool: list[RAQAPoolItem]
    question: str
    answer: str  # decimal count
    relation: str = ""
    predicate_object: str = ""

    task = TASK_R


Sample = SAQASample | MAQASample | RAQASample


@dataclass
class SynthConfig:
    seed: int = 0
    max_input_sentences_per_sample: int = 3
    yes_equivalence: str | dict = EXACT_OBJECT
    relevant_per_question: tuple[int, int] = (2, 3)
    irrelevant_per_question: tuple[int, int] = (7, 10)
    template_table: dict[str, RelationTemplates] = field(default_factory=default_template_table)

    def __post_init__(self) -> None:
        if self.max_input_sentences_per_sample < 1:
            raise SynthError("max_input_sentences_per_sample must be positive")
        for name, (lo, hi) in (
            ("relevant_per_question", self.relevant_per_question),
            ("irrelevant_per_question", self.irrelevant_per_question),
        ):
            if lo < 1 or hi < lo:
                raise SynthError(f"{name} range ({lo}, {hi}) is empty or non-positive")


def _frame(triplet: Triplet) -> str:
    return f"{triplet.subject} {triplet.relation} {triplet.object}."


def _ordered_sample(rng: random.Random, items: list, k: int) -> list:
    """Seeded without-replacement sample preserving original order."""
    idx = sorted(rng.sample(range(len(items)), k))
    return [items[i] for i in idx]


# ---------------------------------------------------------------------------
# Generators

def gen_s_aqa(kb: KnowledgeBase, config: SynthConfig) -> list[SAQASample]:
    """One sample per (entity, held-out triplet) with a usable template."""
    samples: list[SAQASample] = []
    for eid in kb.entity_ids():
        triplets = kb.triplets_of(eid)
        if len(triplets) < 2:
            continue
        for ti, excluded in enumerate(triplets):
            try:
                question = render_question(config.template_table, excluded, TASK_S)
            except (MissingTemplate, AnswerLeakage):
                continue
            remaining = triplets[:ti] + triplets[ti + 1 :]
            k = min(config.max_input_sentences_per_sample, len(remaining))
            rng = random.Random(stable_seed(config.seed, TASK_S, eid, ti))
            chosen = _ordered_sample(rng, remaining, k)
            samples.append(
                SAQASample(
                    id=f"{TASK_S}_{len(samples):05d}",
                    input_sentences=[_frame(t) for t in chosen],
                    audio_refs=["" for _ in chosen],
                    question=question,
                    answer=excluded.object,
                    gold_entity=eid,
                    gold_entity_name=kb.entity_name(eid),
                    excluded_triplet=excluded,
                )
            )
    if not samples:
        raise NoEligibleEntity("no entity yields an s_aqa sample under this config")
    return samples


def _triplets_by_relation(kb: KnowledgeBase) -> dict[str, list[tuple[int, Triplet]]]:
    grouped: dict[str, list[tuple[int, Triplet]]] = {}
    for eid in kb.entity_ids():
        for t in kb.triplets_of(eid):
            grouped.setdefault(t.relation, []).append((eid, t))
    return grouped


def gen_m_aqa(kb: KnowledgeBase, config: SynthConfig) -> list[MAQASample]:
    """Cross-entity pairs sharing a relation, balanced Yes/No within one."""
    grouped = _triplets_by_relation(kb)
    yes_pairs: list[tuple[str, tuple[int, Triplet], tuple[int, Triplet]]] = []
    no_pairs: list[tuple[str, tuple[int, Triplet], tuple[int, Triplet]]] = []
    for relation in sorted(grouped):
        entry = config.template_table.get(relation)
        if entry is None or entry.m_aqa is None:
            continue
        rule = effective_equivalence(config.template_table, relation, config.yes_equivalence)
        members = grouped[relation]
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                (ea, ta), (eb, tb) = members[i], members[j]
                if ea == eb:
                    continue
                if objects_equivalent(ta.object, tb.object, rule):
                    yes_pairs.append((relation, members[i], members[j]))
                else:
                    no_pairs.append((relation, members[i], members[j]))
    if not yes_pairs and not no_pairs:
        raise NoEligiblePair("no cross-entity pair shares a templated relation")

    rng = random.Random(stable_seed(config.seed, TASK_M))
    target = min(len(yes_pairs), len(no_pairs))
    if target > 0:
        yes_sel = _ordered_sample(rng, yes_pairs, target)
        no_sel = _ordered_sample(rng, no_pairs, target)
    else:  # one side empty: balance impossible, keep what exists
        yes_sel, no_sel = yes_pairs, no_pairs
    labelled = [(p, "Yes") for p in yes_sel] + [(p, "No") for p in no_sel]
    rng.shuffle(labelled)

    samples: list[MAQASample] = []
    for (relation, (ea, ta), (eb, tb)), answer in labelled:
        question = render_question(config.template_table, (ta, tb), TASK_M)
        rule = effective_equivalence(config.template_table, relation, config.yes_equivalence)
        samples.append(
            MAQASample(
                id=f"{TASK_M}_{len(samples):05d}",
                inputs=[
                    MAQAInput(_frame(ta), "", ea, kb.entity_name(ea), ta),
                    MAQAInput(_frame(tb), "", eb, kb.entity_name(eb), tb),
                ],
                question=question,
                answer=answer,
                equivalence=rule if isinstance(rule, str) else "custom-table",
            )
        )
    return samples


def gen_r_aqa(kb: KnowledgeBase, config: SynthConfig) -> list[RAQASample]:
    """Count questions over pools of relevant items plus distractors."""
    grouped = _triplets_by_relation(kb)
    rel_lo, rel_hi = config.relevant_per_question
    irr_lo, irr_hi = config.irrelevant_per_question
    all_triplets = [(eid, t) for eid in kb.entity_ids() for t in kb.triplets_of(eid)]

    # (relation, normalized object) classes, one candidate question each.
    classes: dict[tuple[str, str], list[tuple[int, Triplet]]] = {}
    for relation in sorted(grouped):
        entry = config.template_table.get(relation)
        if entry is None or entry.r_aqa is None:
            continue
        for eid, t in grouped[relation]:
            classes.setdefault((relation, normalize_text(t.object)), []).append((eid, t))

    samples: list[RAQASample] = []
    for (relation, norm_obj) in sorted(classes):
        members = classes[(relation, norm_obj)]
        # one member per entity; count questions count distinct entities
        by_entity: dict[int, tuple[int, Triplet]] = {}
        for eid, t in members:
            by_entity.setdefault(eid, (eid, t))
        distinct = [by_entity[eid] for eid in sorted(by_entity)]
        if len(distinct) < rel_lo:
            continue
        rng = random.Random(stable_seed(config.seed, TASK_R, relation, norm_obj))
        k_rel = min(rng.randint(rel_lo, rel_hi), len(distinct))
        relevant = _ordered_sample(rng, distinct, k_rel)

        class_entities = set(by_entity)
        candidates = [
            (eid, t)
            for eid, t in all_triplets
            if eid not in class_entities
            and t.relation != relation
            and normalize_text(t.object) != norm_obj
        ]
        if len(candidates) < irr_lo:
            continue
        k_irr = min(rng.randint(irr_lo, irr_hi), len(candidates))
        distractors = _ordered_sample(rng, candidates, k_irr)

        items = [
            RAQAPoolItem(_frame(t), "", eid, kb.entity_name(eid), True, t)
            for eid, t in relevant
        ] + [
            RAQAPoolItem(_frame(t), "", eid, kb.entity_name(eid), False, t)
            for eid, t in distractors
        ]
        rng.shuffle(items)
        question = render_question(config.template_table, relevant[0][1], TASK_R)
        samples.append(
            RAQASample(
                id=f"{TASK_R}_{len(samples):05d}",
                pool=items,
                question=question,
                answer=str(len(relevant)),
                relation=relation,
                predicate_object=relevant[0][1].object,
            )
        )
    if not samples:
        raise InsufficientDistractors(
            "no (relation, object) class can be paired with enough distractors"
        )
    return samples


# ---------------------------------------------------------------------------
# Serialization

def sample_to_record(sample: Sample) -> dict:
    if isinstance(sample, SAQASample):
        return {
            "id": sample.id,
            "task": TASK_S,
            "question": sample.question,
            "answer": sample.answer,
            "inputs": [
                {
                    "sentence": s,
                    "audio_ref": r,
                    "gold_entity_name": sample.gold_entity_name,
                }
                for s, r in zip(sample.input_sentences, sample.audio_refs)
            ],
            "meta": {
                "excluded_triplet": list(sample.excluded_triplet.as_tuple()),
                "gold_entity_ids": [sample.gold_entity],
            },
        }
    if isinstance(sample, MAQASample):
        return {
            "id": sample.id,
            "task": TASK_M,
            "question": sample.question,
            "answer": sample.answer,
            "inputs": [
                {
                    "sentence": inp.sentence,
                    "audio_ref": inp.audio_ref,
                    "gold_entity_name": inp.gold_entity_name,
                }
                for inp in sample.inputs
            ],
            "meta": {
                "source_triplets": [list(i.source_triplet.as_tuple()) for i in sample.inputs],
                "gold_entity_ids": [i.gold_entity for i in sample.inputs],
                "equivalence": sample.equivalence,
            },
        }
    if isinstance(sample, RAQASample):
        return {
            "id": sample.id,
            "task": TASK_R,
            "question": sample.question,
            "answer": sample.answer,
            "inputs": [
                {
                    "sentence": item.sentence,
                    "audio_ref": item.audio_ref,
                    "gold_entity_name": item.gold_entity_name,
                    "relevant": item.relevant,
                }
                for item in sample.pool
            ],
            "meta": {
                "source_triplets": [list(i.source_triplet.as_tuple()) for i in sample.pool],
                "gold_entity_ids": [i.gold_entity for i in sample.pool],
                "relation": sample.relation,
                "predicate_object": sample.predicate_object,
            },
        }
    raise TypeError(f"unknown sample type {type(sample)!r}")


def sample_from_record(record: dict) -> Sample:
    task = record["task"]
    meta = record.get("meta", {})
    inputs = record.get("inputs", [])
    if task == TASK_S:
        return SAQASample(
            id=record["id"],
            input_sentences=[i["sentence"] for i in inputs],
            audio_refs=[i["audio_ref"] for i in inputs],
            question=record["question"],
            answer=record["answer"],
            gold_entity=meta["gold_entity_ids"][0],
            gold_entity_name=inputs[0]["gold_entity_name"] if inputs else "",
            excluded_triplet=Triplet(*meta["excluded_triplet"]),
        )
    if task == TASK_M:
        return MAQASample(
            id=record["id"],
            inputs=[
                MAQAInput(
                    sentence=i["sentence"],
                    audio_ref=i["audio_ref"],
                    gold_entity=gid,
                    gold_entity_name=i["gold_entity_name"],
                    source_triplet=Triplet(*st),
                )
                for i, gid, st in zip(inputs, meta["gold_entity_ids"], meta["source_triplets"])
            ],
            question=record["question"],
            answer=record["answer"],
            equivalence=meta.get("equivalence", EXACT_OBJECT),
        )
    if task == TASK_R:
        return RAQASample(
            id=record["id"],
            pool=[
                RAQAPoolItem(
                    sentence=i["sentence"],
                    audio_ref=i["audio_ref"],
                    gold_entity=gid,
                    gold_entity_name=i["gold_entity_name"],
                    relevant=bool(i["relevant"]),
                    source_triplet=Triplet(*st),
                )
                for i, gid, st in zip(inputs, meta["gold_entity_ids"], meta["source_triplets"])
            ],
            question=record["question"],
            answer=record["answer"],
            relation=meta.get("relation", ""),
            predicate_object=meta.get("predicate_object", ""),
        )
    raise SynthError(f"unknown task {task!r}")


@dataclass
class DatasetManifest:
    task: str
    samples: int
    answer_type: str
    unique_answers: int
    avg_relevant_per_question: float | None = None
    avg_irrelevant_per_question: float | None = None

    def to_dict(self) -> dict:
        out = {
            "task": self.task,
            "samples": self.samples,
            "answer_type": self.answer_type,
            "unique_answers": self.unique_answers,
        }
        if self.avg_relevant_per_question is not None:
            out["avg_relevant_per_question"] = self.avg_relevant_per_question
        if self.avg_irrelevant_per_question is not None:
            out["avg_irrelevant_per_question"] = self.avg_irrelevant_per_question
        return out


def build_manifest(samples: Sequence[Sample]) -> DatasetManifest:
    if not samples:
        raise SynthError("cannot build a manifest for zero samples")
    task = samples[0].task
    answers = {normalize_text(s.answer) for s in samples}
    manifest = DatasetManifest(
        task=task,
        samples=len(samples),
        answer_type=ANSWER_TYPES[task],
        unique_answers=len(answers),
    )
    if task == TASK_R:
        rel = [sum(1 for i in s.pool if i.relevant) for s in samples]
        irr = [sum(1 for i in s.pool if not i.relevant) for s in samples]
        manifest.avg_relevant_per_question = sum(rel) / len(rel)
        manifest.avg_irrelevant_per_question = sum(irr) / len(irr)
    return manifest


def emit_dataset(samples: Sequence[Sample], out_path: str | Path) -> DatasetManifest:
    """Write samples as line-delimited JSON; returns the dataset manifest."""
    if not samples:
        raise SynthError("refusing to emit an empty dataset")
    out_path = Path(out_path)
    try:
        tmp = out_path.with_name(out_path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for sample in samples:
                fh.write(json.dumps(sample_to_record(sample), ensure_ascii=False))
                fh.write("\n")
        tmp.replace(out_path)
    except OSError as exc:
        raise IoFailure(f"cannot write dataset to {out_path}: {exc}") from exc
    return build_manifest(samples)


def load_dataset(path: str | Path) -> list[Sample]:
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                samples.append(sample_from_record(json.loads(line)))
    return samples


# ---------------------------------------------------------------------------
# Audio synthesis

@dataclass
class AudioFailure:
    sample_id: str
    input_index: int
    error: str


def _sample_sentences(sample: Sample) -> list[str]:
    if isinstance(sample, SAQASample):
        return sample.input_sentences
    if isinstance(sample, MAQASample):
        return [i.sentence for i in sample.inputs]
    return [i.sentence for i in sample.pool]


def _set_ref(sample: Sample, index: int, ref: str) -> None:
    if isinstance(sample, SAQASample):
        sample.audio_refs[index] = ref
    elif isinstance(sample, MAQASample):
        sample.inputs[index].audio_ref = ref
    else:
        sample.pool[index].audio_ref = ref


def synth_audio(
    samples: Sequence[Sample],
    tts=None,
    text_proxy: bool = False,
) -> list[AudioFailure]:
    """Fill every input's audio_ref, via a TTS adapter or text-proxy refs.

    Per-item adapter failures are recorded and skipped, not fatal.
    """
    if tts is None and not text_proxy:
        raise AdapterUnavailable("no TTS adapter configured and text-proxy mode off")
    failures: list[AudioFailure] = []
    for sample in samples:
        for idx, sentence in enumerate(_sample_sentences(sample)):
            if text_proxy:
                _set_ref(sample, idx, make_text_proxy_ref(sentence))
                continue
            try:
                _set_ref(sample, idx, tts(sentence))
            except Exception as exc:  # adapter errors stay per-item
                failures.append(AudioFailure(sample.id, idx, str(exc)))
    return failures
