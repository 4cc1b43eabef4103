"""Document-level embeddings from unit embeddings via weighted mean pooling."""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .corpus import ChunkUnit, Document


class PoolingMethod(Enum):
    """How unit vectors are weighted when pooled into one document vector."""

    MP = "mp"      # plain mean
    LP = "lp"      # weight = unit token count
    IDF = "idf"    # weight = mean idf of the unit's tokens
    LIDF = "lidf"  # weight = token count x mean idf

    @classmethod
    def from_string(cls, text: str) -> "PoolingMethod":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            choices = ", ".join(m.name for m in cls)
            raise ValueError(f"unknown pooling method {text!r} (choose from {choices})") from None

    @property
    def needs_idf(self) -> bool:
        return self in (PoolingMethod.IDF, PoolingMethod.LIDF)


def tokenize(text: str) -> list[str]:
    """Whitespace tokens, NFC-normalized, case preserved."""
    return [unicodedata.normalize("NFC", token) for token in text.split()]


@dataclass(frozen=True)
class IdfTable:
    """Smoothed inverse document frequencies over one corpus side."""

    doc_count: int
    df: dict[str, int]

    def __post_init__(self) -> None:
        if self.doc_count < 1:
            raise ValueError(f"doc_count must be >= 1, got {self.doc_count}")
        for token, count in self.df.items():
            if not 1 <= count <= self.doc_count:
                raise ValueError(
                    f"document frequency {count} for token {token!r} outside [1, {self.doc_count}]"
                )

    def idf(self, token: str) -> float:
        """ln((1 + N) / (1 + df)) + 1; at least 1 for seen tokens, maximal for unseen."""
        return math.log((1 + self.doc_count) / (1 + self.df.get(token, 0))) + 1.0


def build_idf(documents: Sequence[Document]) -> IdfTable:
    """Count, for each token, how many documents contain it."""
    if not documents:
        raise ValueError("cannot build an idf table from an empty document list")
    df: dict[str, int] = {}
    for doc in documents:
        seen: set[str] = set()
        for sentence in doc.sentences:
            seen.update(tokenize(sentence))
        for token in seen:
            df[token] = df.get(token, 0) + 1
    return IdfTable(doc_count=len(documents), df=df)


def _unit_weight(unit: ChunkUnit, method: PoolingMethod, idf: IdfTable | None) -> float:
    if method is PoolingMethod.MP:
        return 1.0
    if method is PoolingMethod.LP:
        return float(unit.token_count)
    tokens = tokenize(unit.text)
    if not tokens:
        return 0.0
    mean_idf = sum(idf.idf(token) for token in tokens) / len(tokens)
    if method is PoolingMethod.IDF:
        return mean_idf
    return float(unit.token_count) * mean_idf


def pool_document(
    units: Sequence[ChunkUnit],
    rows: np.ndarray,
    method: PoolingMethod,
    idf: IdfTable | None = None,
) -> np.ndarray:
    """L2-normalized weighted mean of the unit rows, as a float32 vector.

    rows[i] must be the normalized embedding of units[i].  Units with zero
    tokens get weight zero under the token-driven methods; if every weight is
    zero, or the weighted sum cancels exactly, that is an error naming the
    document.
    """
    if not units:
        raise ValueError("cannot pool a document with no units")
    rows = np.asarray(rows, dtype=np.float32)
    if rows.ndim != 2 or rows.shape[0] != len(units):
        raise ValueError(f"expected {len(units)} embedding rows, got shape {rows.shape}")
    if method.needs_idf and idf is None:
        raise ValueError(f"{method.name} pooling requires an idf table")
    if not method.needs_idf and idf is not None:
        raise ValueError(f"{method.name} pooling does not take an idf table")
    doc_id = units[0].doc_id
    weights = np.array([_unit_weight(unit, method, idf) for unit in units], dtype=np.float64)
    if not weights.any():
        raise ValueError(f"all unit weights are zero for doc {doc_id!r} under {method.name}")
    pooled = rows.astype(np.float64).T @ weights
    norm = float(np.linalg.norm(pooled))
    if norm == 0.0:
        raise ValueError(f"pooled vector for doc {doc_id!r} cancels to zero")
    return (pooled / norm).astype(np.float32)
