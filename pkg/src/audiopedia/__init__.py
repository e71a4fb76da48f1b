"""Knowledge-intensive audio QA toolkit.

Synthesizes three benchmark families (single-audio, multi-audio, and
retrieval-augmented QA) from a triplet knowledge base, links audio to
per-entity knowledge by embedding similarity, infuses prompts with the
linked knowledge, and evaluates any answering backend behind a uniform
wire protocol.
"""

from .kb import (
    KnowledgeBase,
    KnowledgeSource,
    Triplet,
    frame_knowledge_sentences,
    ingest_triplets,
    knowledge_view,
    load_kb,
)
from .linking import EntityIndex, LinkResult, build_entity_index, link, link_many
from .pipeline import AnswerRecord, PipelineConfig, Prompt, build_prompt, mock_oracle_answer
from .retrieval import RetrievalResult, calibrate_threshold, retrieve
from .evaluation import EvalReport, ael_accuracy, aqa_accuracy, retrieval_f1, run_eval
from .synth import SynthConfig, gen_m_aqa, gen_r_aqa, gen_s_aqa

__version__ = "0.1.0"

__all__ = [
    "AnswerRecord",
    "EntityIndex",
    "EvalReport",
    "KnowledgeBase",
    "KnowledgeSource",
    "LinkResult",
    "PipelineConfig",
    "Prompt",
    "RetrievalResult",
    "SynthConfig",
    "Triplet",
    "__version__",
    "ael_accuracy",
    "aqa_accuracy",
    "build_entity_index",
    "build_prompt",
    "calibrate_threshold",
    "frame_knowledge_sentences",
    "gen_m_aqa",
    "gen_r_aqa",
    "gen_s_aqa",
    "ingest_triplets",
    "knowledge_view",
    "link",
    "link_many",
    "load_kb",
    "mock_oracle_answer",
    "retrieval_f1",
    "retrieve",
    "run_eval",
]
