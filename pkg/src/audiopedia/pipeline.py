"""Prompt assembly and the three task pipelines.

The pipelines link audio to knowledge, infuse the prompt with the linked
knowledge, and hand the rendered prompt plus audio refs to an answerer
backend. The built-in mock answerer is a deterministic stand-in that
reads the answer straight out of the knowledge block, which lets every
pipeline run end to end with no model at all.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .kb import KnowledgeSource, stable_seed
from .linking import (
    EntityIndex,
    LinkResult,
    link,
    link_many,
    link_oracle,
    transcribe,
)
from .retrieval import (
    DEFAULT_THRESHOLD,
    RetrievalResult,
    fit_pool_vectorizer,
    retrieve,
)
from .synth import (
    DECADE_BUCKET,
    EXACT_OBJECT,
    MAQASample,
    RAQASample,
    SAQASample,
    Sample,
    objects_equivalent,
)
from .textenc import normalize_text, tokenize

DEFAULT_INSTRUCTION = "Answer the question using the audio and the provided knowledge."

REFUSAL = "unknown"

_KNOWLEDGE_HEADER = "Knowledge:"
_QUESTION_HEADER = "Question: "

# Question words ignored when checking whether a knowledge sentence covers
# a count question's content tokens.
_COUNT_STOPWORDS = {
    "how", "many", "of", "these", "those", "do", "does", "did", "are", "is",
    "was", "were", "have", "has", "had", "the", "a", "an", "restaurants",
    "restaurant", "places", "place", "here", "there",
}

_BINARY_STARTERS = {
    "are", "is", "do", "does", "did", "was", "were", "can", "could", "will",
    "would", "have", "has", "had", "am",
}

_TOKEN_SPAN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class PipelineError(RuntimeError):
    pass


class AnswererUnavailable(PipelineError):
    pass


@dataclass(frozen=True)
class Prompt:
    """Instruction, optional knowledge block, question and audio refs."""

    instruction: str
    knowledge_block: str
    question: str
    audio_refs: tuple[str, ...]

    def render(self) -> str:
        parts = [self.instruction]
        if self.knowledge_block:
            parts.append(f"{_KNOWLEDGE_HEADER}\n{self.knowledge_block}")
        parts.append(f"{_QUESTION_HEADER}{self.question}")
        return "\n\n".join(parts)


def build_prompt(
    question: str,
    linked_knowledge_list: Sequence[str],
    audio_refs: Sequence[str] = (),
    instruction: str = DEFAULT_INSTRUCTION,
) -> Prompt:
    """Join knowledge texts in input order with blank-line separators."""
    if not question:
        raise PipelineError("prompt question must be non-empty")
    return Prompt(
        instruction=instruction,
        knowledge_block="\n\n".join(linked_knowledge_list),
        question=question,
        audio_refs=tuple(audio_refs),
    )


# ---------------------------------------------------------------------------
# Mock-oracle answerer. Works from the rendered prompt text alone so the
# wire reference server can reproduce it byte for byte.

def _split_sentences(block: str) -> list[str]:
    return [s for s in re.split(r"(?<=\.)\s+", block.strip()) if s]


def _extract_object(sentence_block: str, question: str) -> str | None:
    """Best-overlap sentence, then its trailing tokens absent from the question.

    Returns the original surface span, or None when every trailing token
    also occurs in the question.
    """
    qtokens = set(tokenize(question))
    sentences = _split_sentences(sentence_block)
    if not sentences:
        return None
    best, best_score = sentences[0], -1
    for sent in sentences:
        score = len(set(tokenize(sent)) & qtokens)
        if score > best_score:
            best, best_score = sent, score
    spans = [(m.group().lower(), m.start(), m.end()) for m in _TOKEN_SPAN_RE.finditer(best)]
    i = len(spans) - 1
    while i >= 0 and spans[i][0] not in qtokens:
        i -= 1
    run = spans[i + 1 :]
    if not run:
        return None
    return best[run[0][1] : run[-1][2]]


def _token_matches(wanted: str, present: set[str]) -> bool:
    return wanted in present or wanted + "s" in present or (
        wanted.endswith("s") and wanted[:-1] in present
    )


def _covers_question(block: str, question: str) -> bool:
    required = [t for t in tokenize(question) if t not in _COUNT_STOPWORDS]
    for sent in _split_sentences(block):
        present = set(tokenize(sent))
        if all(_token_matches(r, present) for r in required):
            return True
    return False


def _parse_prompt(prompt_text: str) -> tuple[list[str], str]:
    """Split a rendered prompt into knowledge blocks and the question."""
    marker = f"\n\n{_QUESTION_HEADER}"
    pos = prompt_text.rfind(marker)
    if pos >= 0:
        question = prompt_text[pos + len(marker):].strip()
        head = prompt_text[:pos]
    elif prompt_text.startswith(_QUESTION_HEADER):
        question = prompt_text[len(_QUESTION_HEADER):].strip()
        head = ""
    else:
        return [], prompt_text.strip()
    kpos = head.find(f"{_KNOWLEDGE_HEADER}\n")
    if kpos < 0:
        return [], question
    block_text = head[kpos + len(_KNOWLEDGE_HEADER) + 1:]
    blocks = [b.strip() for b in block_text.split("\n\n") if b.strip()]
    return blocks, question


def mock_oracle_answer(prompt: "Prompt | str") -> str:
    """Deterministic answerer reading the answer from the knowledge block.

    Open questions return the object span of the sentence overlapping the
    question most; Yes/No questions compare per-block extracted objects
    ("same decade" switches to decade equivalence); "How many" questions
    count the blocks covering the question's content tokens. Without a
    knowledge block it refuses with "unknown". Questions whose templates
    carry the relation's tokens extract reliably; others fall back to the
    earliest sentence.
    """
    text = prompt.render() if isinstance(prompt, Prompt) else prompt
    blocks, question = _parse_prompt(text)
    if not blocks or not question:
        return REFUSAL
    qnorm = normalize_text(question)
    qtokens = tokenize(question)

    if qnorm.startswith("how many"):
        return str(sum(1 for b in blocks if _covers_question(b, question)))

    if qtokens and qtokens[0] in _BINARY_STARTERS:
        extracted = [_extract_object(b, question) for b in blocks]
        if any(e is None for e in extracted):
            return REFUSAL
        rule = DECADE_BUCKET if "same decade" in qnorm else EXACT_OBJECT
        first = extracted[0]
        same = all(objects_equivalent(first, other, rule) for other in extracted[1:])
        return "Yes" if same else "No"

    span = _extract_object(" ".join(blocks), question)
    return span if span is not None else REFUSAL


# ---------------------------------------------------------------------------
# Pipelines

@dataclass
class PipelineConfig:
    knowledge_enabled: bool = True
    knowledge_source: KnowledgeSource = field(default_factory=KnowledgeSource.full)
    linking_mode: str = "predicted"  # "predicted" | "oracle"
    retrieval_threshold: float = DEFAULT_THRESHOLD
    answerer: Callable[[str, list[str]], str] | None = None
    answerer_label: str = "mock-oracle"
    instruction: str = DEFAULT_INSTRUCTION
    asr: Callable[[str], str] | None = None
    noise_rate: float = 0.0
    noise_seed: int = 0

    def __post_init__(self) -> None:
        if self.linking_mode not in ("predicted", "oracle"):
            raise PipelineError(f"unknown linking mode {self.linking_mode!r}")

    def call_answerer(self, prompt_text: str, audio_refs: list[str]) -> str:
        if self.answerer is None:
            return mock_oracle_answer(prompt_text)
        return self.answerer(prompt_text, audio_refs)


@dataclass
class AnswerRecord:
    sample_id: str
    task: str
    generated_text: str
    prompt: Prompt
    links: list[LinkResult] = field(default_factory=list)
    retrieval: RetrievalResult | None = None
    failure: str | None = None

    @property
    def chosen_entities(self) -> list[int]:
        return [l.chosen for l in self.links]

    @property
    def prompt_hash(self) -> str:
        return hashlib.sha256(self.prompt.render().encode("utf-8")).hexdigest()

    def to_record(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "task": self.task,
            "generated_text": self.generated_text,
            "chosen_entities": self.chosen_entities,
            "retained_indices": list(self.retrieval.retained) if self.retrieval else None,
            "prompt_hash": self.prompt_hash,
            "failure": self.failure,
        }


def _transcript_for(sample_id: str, index: int, ref: str, config: PipelineConfig) -> str:
    return transcribe(
        ref,
        asr=config.asr,
        noise_rate=config.noise_rate,
        noise_seed=stable_seed(config.noise_seed, sample_id, index),
    )


def answer_s_aqa(sample: SAQASample, index: EntityIndex, config: PipelineConfig) -> AnswerRecord:
    transcripts = [
        _transcript_for(sample.id, i, ref, config)
        for i, ref in enumerate(sample.audio_refs)
    ]
    transcript = " ".join(transcripts)
    links: list[LinkResult] = []
    if config.knowledge_enabled:
        if config.linking_mode == "oracle":
            links = [link_oracle(index, sample.gold_entity)]
        else:
            links = [link(transcript, index)]
    prompt = build_prompt(
        sample.question,
        [l.linked_knowledge for l in links],
        sample.audio_refs,
        config.instruction,
    )
    text = config.call_answerer(prompt.render(), list(prompt.audio_refs))
    return AnswerRecord(sample.id, sample.task, text, prompt, links)


def answer_m_aqa(sample: MAQASample, index: EntityIndex, config: PipelineConfig) -> AnswerRecord:
    if len(sample.inputs) != 2:
        raise PipelineError(f"m_aqa sample {sample.id} must have exactly 2 inputs")
    transcripts = [
        _transcript_for(sample.id, i, inp.audio_ref, config)
        for i, inp in enumerate(sample.inputs)
    ]
    links: list[LinkResult] = []
    if config.knowledge_enabled:
        if config.linking_mode == "oracle":
            links = [link_oracle(index, inp.gold_entity) for inp in sample.inputs]
        else:
            links = link_many(transcripts, index)
    refs = [inp.audio_ref for inp in sample.inputs]
    prompt = build_prompt(
        sample.question,
        [l.linked_knowledge for l in links],
        refs,
        config.instruction,
    )
    text = config.call_answerer(prompt.render(), list(prompt.audio_refs))
    return AnswerRecord(sample.id, sample.task, text, prompt, links)


def answer_r_aqa(sample: RAQASample, index: EntityIndex, config: PipelineConfig) -> AnswerRecord:
    if not sample.pool:
        raise PipelineError(f"r_aqa sample {sample.id} has an empty pool")
    transcripts = [
        _transcript_for(sample.id, i, item.audio_ref, config)
        for i, item in enumerate(sample.pool)
    ]
    links: list[LinkResult] = []
    retrieval: RetrievalResult | None = None
    if config.knowledge_enabled:
        vectorizer = fit_pool_vectorizer(sample.question, transcripts)
        retrieval = retrieve(
            sample.question, transcripts, vectorizer, config.retrieval_threshold
        )
        retained_transcripts = [transcripts[i] for i in retrieval.retained]
        if config.linking_mode == "oracle":
            links = [link_oracle(index, sample.pool[i].gold_entity) for i in retrieval.retained]
        else:
            links = link_many(retained_transcripts, index)
        refs = [sample.pool[i].audio_ref for i in retrieval.retained]
    else:
        refs = [item.audio_ref for item in sample.pool]
    prompt = build_prompt(
        sample.question,
        [l.linked_knowledge for l in links],
        refs,
        config.instruction,
    )
    text = config.call_answerer(prompt.render(), list(prompt.audio_refs))
    return AnswerRecord(sample.id, sample.task, text, prompt, links, retrieval)


def answer_sample(sample: Sample, index: EntityIndex, config: PipelineConfig) -> AnswerRecord:
    if isinstance(sample, SAQASample):
        return answer_s_aqa(sample, index, config)
    if isinstance(sample, MAQASample):
        return answer_m_aqa(sample, index, config)
    if isinstance(sample, RAQASample):
        return answer_r_aqa(sample, index, config)
    raise PipelineError(f"unknown sample type {type(sample)!r}")
