"""Deterministic in-process text encoding.

The built-in encoder is a token-level TF-IDF vectorizer producing sparse
vectors, plus the cosine kernel used by entity linking and retrieval.
Remote neural encoders can stand in for it as long as they produce
``Vector`` values; see ``TfidfEncoder`` for the fit/encode surface they
need to satisfy.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class EmptyCorpus(ValueError):
    """Raised when a vectorizer is fitted on an empty corpus."""


def tokenize(text: str) -> list[str]:
    """Lowercased maximal runs of letters and digits; punctuation splits."""
    return _TOKEN_RE.findall(text.lower())


def normalize_text(text: str) -> str:
    """Case-fold and collapse whitespace runs; the toolkit's matching form."""
    return " ".join(text.split()).casefold()


@dataclass(frozen=True)
class Vector:
    """Sparse vector stored as (dimension, weight) pairs.

    Dimensions are strictly increasing and weights are finite; the zero
    vector is an empty pair tuple.
    """

    pairs: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        last = -1
        for dim, weight in self.pairs:
            if dim <= last:
                raise ValueError(f"dimensions not strictly increasing at {dim}")
            if not math.isfinite(weight):
                raise ValueError(f"non-finite weight at dimension {dim}")
            last = dim

    @classmethod
    def from_mapping(cls, weights: dict[int, float]) -> "Vector":
        return cls(tuple(sorted((d, float(w)) for d, w in weights.items() if w != 0.0)))

    @classmethod
    def from_dense(cls, values: Sequence[float]) -> "Vector":
        return cls(tuple((i, float(v)) for i, v in enumerate(values) if v != 0.0))

    def to_dense(self, dim: int) -> list[float]:
        dense = [0.0] * dim
        for d, w in self.pairs:
            dense[d] = w
        return dense

    def scale(self, factor: float) -> "Vector":
        return Vector(tuple((d, w * factor) for d, w in self.pairs))

    def norm(self) -> float:
        return math.sqrt(sum(w * w for _, w in self.pairs))

    def dot(self, other: "Vector") -> float:
        i, j, total = 0, 0, 0.0
        a, b = self.pairs, other.pairs
        while i < len(a) and j < len(b):
            da, db = a[i][0], b[j][0]
            if da == db:
                total += a[i][1] * b[j][1]
                i += 1
                j += 1
            elif da < db:
                i += 1
            else:
                j += 1
        return total


def cosine(u: Vector, v: Vector) -> float:
    """Cosine similarity in [-1, 1]; zero-norm inputs score 0 by convention."""
    nu, nv = u.norm(), v.norm()
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return u.dot(v) / (nu * nv)


@dataclass(frozen=True)
class Vectorizer:
    """Fitted TF-IDF model: vocabulary in first-occurrence order plus IDF weights."""

    vocabulary: dict[str, int]
    idf: tuple[float, ...]


def fit_vectorizer(corpus: Iterable[str]) -> Vectorizer:
    """Fit a TF-IDF vectorizer on a non-empty corpus.

    IDF uses the smoothed form ln((1 + D) / (1 + df)) + 1 so that weights
    stay finite and strictly positive for every vocabulary token.
    """
    docs = [tokenize(text) for text in corpus]
    if not docs:
        raise EmptyCorpus("cannot fit a vectorizer on zero documents")
    vocabulary: dict[str, int] = {}
    df = [0] * 0
    doc_freq: list[int] = []
    for tokens in docs:
        seen = set()
        for tok in tokens:
            if tok not in vocabulary:
                vocabulary[tok] = len(vocabulary)
                doc_freq.append(0)
            if tok not in seen:
                doc_freq[vocabulary[tok]] += 1
                seen.add(tok)
    n_docs = len(docs)
    idf = tuple(math.log((1 + n_docs) / (1 + d)) + 1.0 for d in doc_freq)
    return Vectorizer(vocabulary=vocabulary, idf=idf)


def encode(vectorizer: Vectorizer, text: str) -> Vector:
    """Term-frequency times IDF over in-vocabulary tokens; OOV tokens are dropped."""
    counts: dict[int, int] = {}
    for tok in tokenize(text):
        dim = vectorizer.vocabulary.get(tok)
        if dim is not None:
            counts[dim] = counts.get(dim, 0) + 1
    return Vector.from_mapping({d: c * vectorizer.idf[d] for d, c in counts.items()})


class TfidfEncoder:
    """Default encoder: fit on a corpus once, then encode arbitrary text.

    Remote encoders plug into the same surface: ``fit(corpus)`` (may be a
    no-op) and ``encode(text) -> Vector`` / ``encode_many(texts)``.
    """

    def __init__(self) -> None:
        self.vectorizer: Vectorizer | None = None

    def fit(self, corpus: Sequence[str]) -> "TfidfEncoder":
        self.vectorizer = fit_vectorizer(corpus)
        return self

    def encode(self, text: str) -> Vector:
        if self.vectorizer is None:
            raise RuntimeError("encoder not fitted")
        return encode(self.vectorizer, text)

    def encode_many(self, texts: Sequence[str]) -> list[Vector]:
        return [self.encode(t) for t in texts]
