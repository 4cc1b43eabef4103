"""Whole-document alignment over pooled unit embeddings."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import Document, Granularity, segment
from .embed_store import EmbeddingMatrix
from .miner import AlignedUnitPair, MarginParams, mine
from .pooling import IdfTable, PoolingMethod, build_idf, pool_document


def pool_corpus(
    documents: Sequence[Document],
    unit_embeddings: EmbeddingMatrix,
    method: PoolingMethod,
    idf: IdfTable | None = None,
) -> EmbeddingMatrix:
    """One pooled row per document, ids = doc ids.

    Units are single sentences; unit_embeddings must hold a normalized row for
    every sentence unit of every document.  When the method needs idf weights
    and none are passed, they are computed from these documents.
    """
    if not documents:
        raise ValueError("cannot pool an empty corpus")
    if method.needs_idf and idf is None:
        idf = build_idf(documents)
    vectors = []
    for doc in documents:
        units = segment(doc, Granularity(1))
        rows = unit_embeddings.select([unit.unit_id for unit in units]).data
        vectors.append(pool_document(units, rows, method, idf if method.needs_idf else None))
    return EmbeddingMatrix(ids=[doc.doc_id for doc in documents], data=np.vstack(vectors))


def align_documents_pooled(
    src_docs: Sequence[Document],
    tgt_docs: Sequence[Document],
    src_embeddings: EmbeddingMatrix,
    tgt_embeddings: EmbeddingMatrix,
    method: PoolingMethod,
    params: MarginParams = MarginParams(),
    workers: int = 1,
) -> list[AlignedUnitPair]:
    """Pool each side into document vectors, then mine document pairs directly.

    Idf statistics, when the method needs them, are computed per corpus side.
    The returned pair ids are document ids.
    """
    x = pool_corpus(src_docs, src_embeddings, method)
    y = pool_corpus(tgt_docs, tgt_embeddings, method)
    return mine(x, y, params, workers=workers)
