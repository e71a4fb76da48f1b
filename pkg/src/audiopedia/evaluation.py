"""Metrics and report assembly.

Answer accuracy is containment-based: a generated text scores 1 when the
normalized gold answer occurs inside it. Entity linking accuracy requires
every predicted entity to match its positional gold. Retrieval quality is
the standard F1 over retained versus gold-relevant pool indices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .kb import KnowledgeBase, KnowledgeSource
from .linking import EntityIndex, build_entity_index
from .textenc import normalize_text


class MetricError(ValueError):
    pass


class EmptyGold(MetricError):
    pass


class ArityMismatch(MetricError):
    pass


class IndexOutOfBounds(MetricError):
    pass


def aqa_accuracy(generated_text: str, gold_answer: str) -> int:
    """1 when the normalized gold answer is a substring of the normalized
    generated text, else 0."""
    gold = normalize_text(gold_answer)
    if not gold:
        raise EmptyGold("gold answer must be non-empty")
    return 1 if gold in normalize_text(generated_text) else 0


def ael_accuracy(link_results: Sequence[int], gold_entities: Sequence[int]) -> int:
    """1 when every predicted entity equals its positional gold, else 0."""
    if len(link_results) != len(gold_entities):
        raise ArityMismatch(
            f"{len(link_results)} predictions vs {len(gold_entities)} golds"
        )
    return 1 if all(p == g for p, g in zip(link_results, gold_entities)) else 0


def retrieval_f1(
    retained_indices: Iterable[int],
    gold_relevant_indices: Iterable[int],
    pool_size: int | None = None,
) -> float:
    """Standard F1 over index sets; both-empty counts as a perfect 1.0."""
    retained = set(retained_indices)
    gold = set(gold_relevant_indices)
    if pool_size is not None:
        for idx in retained | gold:
            if not 0 <= idx < pool_size:
                raise IndexOutOfBounds(f"index {idx} outside pool of {pool_size}")
    if not retained and not gold:
        return 1.0
    if not retained or not gold:
        return 0.0
    tp = len(retained & gold)
    if tp == 0:
        return 0.0
    precision = tp / len(retained)
    recall = tp / len(gold)
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Reports

def _mean(values: Sequence[float]) -> float | None:
    return sum(values) / len(values) if values else None


@dataclass
class EvalReport:
    """Aggregated metrics plus the per-sample rows they were averaged from."""

    config: dict
    accuracy: dict[str, float | None] = field(default_factory=dict)
    ael_accuracy: float | None = None
    retrieval_f1_mean: float | None = None
    rows: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "accuracy": self.accuracy,
            "ael_accuracy": self.ael_accuracy,
            "retrieval_f1_mean": self.retrieval_f1_mean,
            "rows": self.rows,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, payload: dict) -> "EvalReport":
        return cls(
            config=payload.get("config", {}),
            accuracy=payload.get("accuracy", {}),
            ael_accuracy=payload.get("ael_accuracy"),
            retrieval_f1_mean=payload.get("retrieval_f1_mean"),
            rows=payload.get("rows", []),
        )


def _fmt(value: float | None) -> str:
    return f"{value:.3f}" if value is not None else "-"


def render_table(reports: Sequence[EvalReport], title: str = "Results") -> str:
    """Plain-text table: one row per report, task accuracies as columns."""
    header = (
        f"{'answerer':<14} {'knowledge':<16} {'linking':<10} "
        f"{'s_aqa':>7} {'m_aqa':>7} {'r_aqa':>7} {'AEL':>7} {'rF1':>7}"
    )
    lines = [title, "=" * len(header), header, "-" * len(header)]
    for report in reports:
        cfg = report.config
        lines.append(
            f"{cfg.get('answerer', '-'):<14} {cfg.get('knowledge_source', '-'):<16} "
            f"{cfg.get('linking_mode', '-'):<10} "
            f"{_fmt(report.accuracy.get('s_aqa')):>7} "
            f"{_fmt(report.accuracy.get('m_aqa')):>7} "
            f"{_fmt(report.accuracy.get('r_aqa')):>7} "
            f"{_fmt(report.ael_accuracy):>7} "
            f"{_fmt(report.retrieval_f1_mean):>7}"
        )
    lines.append("=" * len(header))
    return "\n".join(lines) + "\n"


def run_eval(samples: Sequence, index: EntityIndex, config) -> EvalReport:
    """Run the matching pipeline per sample and aggregate the metrics.

    Per-sample failures score 0 and are flagged; the batch never aborts.
    """
    from . import pipeline as qa
    from .synth import MAQASample, RAQASample, SAQASample

    rows: list[dict] = []
    for sample in samples:
        row: dict = {"sample_id": sample.id, "task": sample.task, "failure": None}
        try:
            record = qa.answer_sample(sample, index, config)
            row["generated_text"] = record.generated_text
            row["accuracy"] = aqa_accuracy(record.generated_text, sample.answer)
            row["prompt_hash"] = record.prompt_hash
            row["chosen_entities"] = record.chosen_entities
            if isinstance(sample, SAQASample):
                golds = [sample.gold_entity]
            elif isinstance(sample, MAQASample):
                golds = [inp.gold_entity for inp in sample.inputs]
            else:
                golds = None
            if golds is not None and record.links:
                row["ael_accuracy"] = ael_accuracy(record.chosen_entities, golds)
            if isinstance(sample, RAQASample) and record.retrieval is not None:
                gold_idx = [i for i, item in enumerate(sample.pool) if item.relevant]
                row["retrieval_f1"] = retrieval_f1(
                    record.retrieval.retained, gold_idx, pool_size=len(sample.pool)
                )
                row["retained_indices"] = list(record.retrieval.retained)
        except Exception as exc:
            row["failure"] = f"{type(exc).__name__}: {exc}"
            row["accuracy"] = 0
            if config.knowledge_enabled:  # metrics that the run would have measured
                if sample.task in ("s_aqa", "m_aqa"):
                    row["ael_accuracy"] = 0
                if sample.task == "r_aqa":
                    row["retrieval_f1"] = 0.0
        rows.append(row)

    accuracy = {
        task: _mean([r["accuracy"] for r in rows if r["task"] == task])
        for task in ("s_aqa", "m_aqa", "r_aqa")
        if any(r["task"] == task for r in rows)
    }
    report = EvalReport(
        config={
            "knowledge_enabled": config.knowledge_enabled,
            "knowledge_source": config.knowledge_source.label,
            "linking_mode": config.linking_mode,
            "threshold": config.retrieval_threshold,
            "answerer": config.answerer_label,
            "noise_rate": config.noise_rate,
        },
        accuracy=accuracy,
        ael_accuracy=_mean([r["ael_accuracy"] for r in rows if "ael_accuracy" in r]),
        retrieval_f1_mean=_mean([r["retrieval_f1"] for r in rows if "retrieval_f1" in r]),
        rows=rows,
    )
    return report


def ablation_suite(
    samples: Sequence,
    kb: KnowledgeBase,
    sources: Sequence[KnowledgeSource],
    config,
) -> list[EvalReport]:
    """One report per knowledge source, shared dataset and settings.

    Each source drives both the linking index and the prompt knowledge.
    """
    from dataclasses import replace

    if not sources:
        raise MetricError("ablation needs at least one knowledge source")
    reports = []
    for source in sources:
        index = build_entity_index(kb, source)
        reports.append(run_eval(samples, index, replace(config, knowledge_source=source)))
    return reports
