"""Threshold retrieval for pools of transcripts.

Every pool transcript is scored against the question by cosine
similarity; items scoring strictly above the threshold are retained in
their original pool order. The vectorizer is fitted per question on the
pool transcripts plus the question text, so question-only tokens still
carry weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .textenc import Vectorizer, cosine, encode, fit_vectorizer

DEFAULT_THRESHOLD = 0.0
DEFAULT_GRID = tuple(round(i * 0.05, 2) for i in range(20))  # 0.00 .. 0.95


class RetrievalError(ValueError):
    pass


class EmptyPool(RetrievalError):
    pass


class EmptyGrid(RetrievalError):
    pass


@dataclass
class RetrievalResult:
    retained: list[int]  # pool indices with score > threshold, pool order
    scores: list[float]  # one score per pool item
    threshold: float


def fit_pool_vectorizer(question: str, transcripts: Sequence[str]) -> Vectorizer:
    return fit_vectorizer(list(transcripts) + [question])


def retrieve(
    question: str,
    transcripts: Sequence[str],
    vectorizer: Vectorizer | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> RetrievalResult:
    """Keep pool items whose cosine with the question is strictly above
    the threshold."""
    if not transcripts:
        raise EmptyPool("retrieval needs a non-empty pool")
    if not -1.0 <= threshold <= 1.0:
        raise RetrievalError("threshold must be within [-1, 1]")
    if vectorizer is None:
        vectorizer = fit_pool_vectorizer(question, transcripts)
    query = encode(vectorizer, question)
    scores = [cosine(query, encode(vectorizer, t)) for t in transcripts]
    retained = [i for i, s in enumerate(scores) if s > threshold]
    return RetrievalResult(retained=retained, scores=scores, threshold=threshold)


def calibrate_threshold(
    dev_samples: Sequence[tuple[str, Sequence[str], Sequence[int]]],
    grid: Sequence[float] = DEFAULT_GRID,
) -> float:
    """Pick the grid threshold maximizing mean F1 over dev samples.

    Each dev sample is (question, transcripts, gold_relevant_indices).
    Ties resolve to the smallest threshold.
    """
    from .evaluation import retrieval_f1  # runtime import avoids a module cycle

    if not grid:
        raise EmptyGrid("calibration grid is empty")
    prepared = []
    for question, transcripts, gold in dev_samples:
        vectorizer = fit_pool_vectorizer(question, transcripts)
        scores = retrieve(question, transcripts, vectorizer, threshold=-1.0).scores
        prepared.append((scores, set(gold)))

    best_threshold, best_f1 = None, -1.0
    for threshold in sorted(grid):
        total = 0.0
        for scores, gold in prepared:
            retained = [i for i, s in enumerate(scores) if s > threshold]
            total += retrieval_f1(retained, gold, pool_size=len(scores))
        mean_f1 = total / len(prepared) if prepared else 0.0
        if mean_f1 > best_f1:
            best_threshold, best_f1 = threshold, mean_f1
    return float(best_threshold)


def export_retrieval_record(
    sample_id: str,
    result: RetrievalResult,
    gold_relevant: Sequence[int],
) -> dict:
    retained = set(result.retained)
    gold = set(gold_relevant)
    return {
        "sample_id": sample_id,
        "threshold": result.threshold,
        "scores": result.scores,
        "retained": [i in retained for i in range(len(result.scores))],
        "gold": [i in gold for i in range(len(result.scores))],
    }
