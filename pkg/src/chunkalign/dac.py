"""Document pairing from mined chunk alignments.

The document alignment coefficient of a candidate pair is
2 * n_aligned / (n_src + n_tgt): the number of chunk alignments joining the
two documents, normalized by their average chunk count.  It is 1 exactly when
both documents have the same chunk count and every chunk is aligned.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Document, Granularity, parse_unit_id, segment
from .embed_store import EmbeddingMatrix
from .miner import AlignedUnitPair, MarginParams, mine

DEFAULT_THRESHOLD = 0.1


def compute_dac(n_src: int, n_tgt: int, n_aligned: int) -> float:
    """2 * n_aligned / (n_src + n_tgt)."""
    return 2.0 * n_aligned / (n_src + n_tgt)


@dataclass(frozen=True)
class DocPairScore:
    """A candidate document pair and its chunk-alignment statistics."""

    src_doc: str
    tgt_doc: str
    n_src: int
    n_tgt: int
    n_aligned: int
    dac: float
    margin_sum: float

    def __post_init__(self) -> None:
        pair = f"({self.src_doc!r}, {self.tgt_doc!r})"
        if self.n_src < 1 or self.n_tgt < 1:
            raise ValueError(f"chunk counts must be >= 1 for pair {pair}")
        if not 0 <= self.n_aligned <= min(self.n_src, self.n_tgt):
            raise ValueError(f"n_aligned {self.n_aligned} out of range for pair {pair}")
        if not 0.0 <= self.dac <= 1.0:
            raise ValueError(f"dac {self.dac} outside [0, 1] for pair {pair}")
        if self.margin_sum < 0.0:
            raise ValueError(f"negative margin_sum for pair {pair}")


@dataclass(frozen=True)
class DacConfig:
    """Knobs for the chunk-based document alignment path."""

    threshold: float = DEFAULT_THRESHOLD
    granularity: Granularity = Granularity(1)
    margin_params: MarginParams = MarginParams()

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")


def aggregate(
    chunk_pairs: Iterable[AlignedUnitPair],
    chunk_counts_src: Mapping[str, int],
    chunk_counts_tgt: Mapping[str, int],
) -> list[DocPairScore]:
    """Group mined chunk pairs by (source doc, target doc) and score each group.

    Document pairs with no mined chunk pair between them are absent from the
    output.  The result is sorted by (src_doc, tgt_doc).
    """
    grouped: dict[tuple[str, str], list] = {}
    for pair in chunk_pairs:
        src_doc, _ = parse_unit_id(pair.src_id)
        tgt_doc, _ = parse_unit_id(pair.tgt_id)
        if src_doc not in chunk_counts_src:
            raise ValueError(f"unknown source doc {src_doc!r} (from unit {pair.src_id!r})")
        if tgt_doc not in chunk_counts_tgt:
            raise ValueError(f"unknown target doc {tgt_doc!r} (from unit {pair.tgt_id!r})")
        entry = grouped.setdefault((src_doc, tgt_doc), [0, 0.0])
        entry[0] += 1
        entry[1] += pair.margin
    scores = [
        DocPairScore(
            src_doc=src_doc,
            tgt_doc=tgt_doc,
            n_src=chunk_counts_src[src_doc],
            n_tgt=chunk_counts_tgt[tgt_doc],
            n_aligned=n_aligned,
            dac=compute_dac(chunk_counts_src[src_doc], chunk_counts_tgt[tgt_doc], n_aligned),
            margin_sum=margin_sum,
        )
        for (src_doc, tgt_doc), (n_aligned, margin_sum) in grouped.items()
    ]
    scores.sort(key=lambda s: (s.src_doc, s.tgt_doc))
    return scores


def select_pairs(
    scores: Sequence[DocPairScore],
    config: DacConfig,
    one_to_one: bool = True,
) -> list[DocPairScore]:
    """Keep pairs at or above the threshold; by default greedily enforce one
    match per document, strongest first.

    Candidates are ranked by descending dac, then descending margin_sum, then
    (src_doc, tgt_doc).  The selection is sorted by (src_doc, tgt_doc).
    """
    surviving = [s for s in scores if s.dac >= config.threshold]
    surviving.sort(key=lambda s: (-s.dac, -s.margin_sum, s.src_doc, s.tgt_doc))
    if one_to_one:
        taken_src: set[str] = set()
        taken_tgt: set[str] = set()
        chosen = []
        for candidate in surviving:
            if candidate.src_doc in taken_src or candidate.tgt_doc in taken_tgt:
                continue
            taken_src.add(candidate.src_doc)
            taken_tgt.add(candidate.tgt_doc)
            chosen.append(candidate)
    else:
        chosen = surviving
    chosen.sort(key=lambda s: (s.src_doc, s.tgt_doc))
    return chosen


def mine_chunk_pairs(
    src_docs: Sequence[Document],
    tgt_docs: Sequence[Document],
    src_embeddings: EmbeddingMatrix,
    tgt_embeddings: EmbeddingMatrix,
    config: DacConfig = DacConfig(),
    workers: int = 1,
) -> tuple[list[AlignedUnitPair], dict[str, int], dict[str, int]]:
    """Segment both corpora and mine chunk pairs globally across them.

    Mining is global: every source chunk competes against every target chunk,
    and document pairs only emerge later from where mined chunks concentrate.
    Returns the mined pairs plus each side's chunks-per-document counts.
    """
    if config.granularity.is_whole_document:
        raise ValueError(
            "chunk alignment needs an integer granularity; "
            "whole-document units are handled by the pooled path"
        )
    src_units = [unit for doc in src_docs for unit in segment(doc, config.granularity)]
    tgt_units = [unit for doc in tgt_docs for unit in segment(doc, config.granularity)]
    counts_src = dict(Counter(unit.doc_id for unit in src_units))
    counts_tgt = dict(Counter(unit.doc_id for unit in tgt_units))
    x = src_embeddings.select([unit.unit_id for unit in src_units])
    y = tgt_embeddings.select([unit.unit_id for unit in tgt_units])
    pairs = mine(x, y, config.margin_params, workers=workers)
    return pairs, counts_src, counts_tgt


def align_documents_dac(
    src_docs: Sequence[Document],
    tgt_docs: Sequence[Document],
    src_embeddings: EmbeddingMatrix,
    tgt_embeddings: EmbeddingMatrix,
    config: DacConfig = DacConfig(),
    workers: int = 1,
    one_to_one: bool = True,
    min_margin: float | None = None,
) -> list[DocPairScore]:
    """Full chunk-based path: mine globally, aggregate per document pair,
    threshold and select.

    min_margin optionally discards mined chunk pairs below the given margin
    before aggregation; by default every mined pair counts and thresholding
    happens only at the document level.
    """
    pairs, counts_src, counts_tgt = mine_chunk_pairs(
        src_docs, tgt_docs, src_embeddings, tgt_embeddings, config, workers=workers
    )
    if min_margin is not None:
        pairs = [pair for pair in pairs if pair.margin >= min_margin]
    return select_pairs(aggregate(pairs, counts_src, counts_tgt), config, one_to_one=one_to_one)


def write_scores_tsv(scores: Sequence[DocPairScore], path: str | Path) -> None:
    """Dump document pairs as src_doc, tgt_doc, n_src, n_tgt, n_aligned, dac."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("# src_doc\ttgt_doc\tn_src\tn_tgt\tn_aligned\tdac\n")
        for s in scores:
            handle.write(
                f"{s.src_doc}\t{s.tgt_doc}\t{s.n_src}\t{s.n_tgt}\t{s.n_aligned}\t{s.dac:.6f}\n"
            )
