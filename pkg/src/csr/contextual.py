"""Contextual retrieval over ground-truth (question, SQL) chunks.

Each chunk pairs a past natural-language question with the SQL that answered
it. At index-build time the question is contextualized: schema text (table
and column names plus their descriptions) for everything the SQL touches is
appended, and the combined text is embedded. Retrieval ranks chunks by
similarity to the incoming question and returns the union of the top-k
chunks' table sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .catalog import SchemaCatalog, TableId, lookup_table
from .similarity import (
    CorpusStats,
    SimilarityConfig,
    bm25_score,
    build_corpus_stats,
    embed,
    embed_batch,
)
from .sqlrefs import RelevantSet, extract_relevant_set
from .topk import top_k_exact

ChunkId = int

CONTEXT_SEPARATOR = " | "


@dataclass
class Chunk:
    id: ChunkId
    question: str
    sql: str
    relevant: RelevantSet
    contextualized: str
    vector: np.ndarray


@dataclass
class ChunkIndex:
    chunks: list[Chunk]
    config: SimilarityConfig
    corpus_stats: CorpusStats
    vectors: np.ndarray  # (N, dimension)
    # Pre-materialized rows and norms; scalar indexing into the matrix is
    # too slow for the per-query exhaustive scan.
    _rows: list[np.ndarray] = field(default_factory=list, repr=False)
    _norms: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if not self._rows:
            self._rows = [self.vectors[i] for i in range(len(self.chunks))]
            self._norms = [float(np.linalg.norm(r)) for r in self._rows]

    def __len__(self) -> int:
        return len(self.chunks)


@dataclass
class ContextualResult:
    ranked_chunks: list[tuple[ChunkId, float]]
    tables: set[TableId]


def contextualize(chunk_question: str, chunk_sql: str, catalog: SchemaCatalog) -> str:
    """Append schema text for the SQL's referenced tables to the question.

    Output is ``question | table: desc; col(desc), col2 | table2 ...`` with
    tables in catalog order, referenced columns in catalog order, and empty
    descriptions elided. SQL touching no catalog tables yields the question
    plus a bare separator.
    """
    relevant = extract_relevant_set(chunk_sql, catalog)
    return chunk_question + CONTEXT_SEPARATOR + describe_relevant(relevant, catalog)


def describe_relevant(relevant: RelevantSet, catalog: SchemaCatalog) -> str:
    segments = []
    for tid in sorted(relevant.tables):
        table = catalog.table(tid)
        seg = table.name
        if table.description:
            seg += ": " + table.description
        col_entries = []
        for _, cid in sorted((t, c) for t, c in relevant.columns if t == tid):
            col = catalog.column(cid)
            entry = col.name
            if col.description:
                entry += f"({col.description})"
            col_entries.append(entry)
        if col_entries:
            seg += "; " + ", ".join(col_entries)
        segments.append(seg)
    return CONTEXT_SEPARATOR.join(segments)


def build_chunk_index(
    trace: list[tuple[str, str]] | list[dict],
    catalog: SchemaCatalog,
    config: SimilarityConfig,
) -> ChunkIndex:
    """Label, contextualize, and embed every trace pair into an index.

    Trace entries are ``(question, sql)`` tuples or dicts with ``question``,
    ``sql``, and an optional ``tables`` list that overrides the extracted
    table set (columns are then restricted to the listed tables).
    """
    if not trace:
        raise ValueError("empty trace: chunk index needs at least one pair")

    chunks: list[Chunk] = []
    contextualized_texts: list[str] = []
    for i, entry in enumerate(trace):
        if isinstance(entry, dict):
            question = entry["question"]
            sql = entry["sql"]
            override = entry.get("tables")
        else:
            question, sql = entry
            override = None
        relevant = extract_relevant_set(sql, catalog)
        if override is not None:
            relevant = _apply_table_override(relevant, override, catalog)
        text = question + CONTEXT_SEPARATOR + describe_relevant(relevant, catalog)
        contextualized_texts.append(text)
        chunks.append(
            Chunk(
                id=i,
                question=question,
                sql=sql,
                relevant=relevant,
                contextualized=text,
                vector=np.zeros(0),
            )
        )

    stats = build_corpus_stats(contextualized_texts)
    vectors = embed_batch(contextualized_texts, config, stats)
    for chunk, vec in zip(chunks, vectors):
        chunk.vector = vec
    return ChunkIndex(chunks=chunks, config=config, corpus_stats=stats, vectors=vectors)


def _apply_table_override(
    relevant: RelevantSet, table_names: list[str], catalog: SchemaCatalog
) -> RelevantSet:
    tables: set[TableId] = set()
    for name in table_names:
        tid = lookup_table(catalog, name)
        if tid is not None:
            tables.add(tid)
    columns = {(t, c) for (t, c) in relevant.columns if t in tables}
    return RelevantSet(tables=tables, columns=columns)


def retrieve_contextual(
    index: ChunkIndex,
    question: str,
    k: int,
    scope: set[TableId] | None = None,
    scope_mode: str = "intersect",
) -> ContextualResult:
    """Top-k most similar chunks and the union of their table sets.

    Ties break by ascending chunk id; ``k`` beyond the index size returns
    everything. With a scope, ``intersect`` mode keeps the global chunk
    ranking and intersects the output tables, while ``filter_chunks`` mode
    drops chunks with no in-scope table before ranking.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if scope_mode not in ("intersect", "filter_chunks"):
        raise ValueError(f"unknown scope_mode '{scope_mode}'")

    if scope is not None and scope_mode == "filter_chunks":
        candidate_ids = [
            c.id for c in index.chunks if c.relevant.tables & scope
        ]
    else:
        candidate_ids = list(range(len(index.chunks)))

    scores = _score_chunks(index, question, candidate_ids)
    ranked = top_k_exact(scores, candidate_ids, k)

    tables: set[TableId] = set()
    for chunk_id, _ in ranked:
        tables |= index.chunks[chunk_id].relevant.tables
    if scope is not None:
        tables &= scope
    return ContextualResult(ranked_chunks=ranked, tables=tables)


def _score_chunks(
    index: ChunkIndex, question: str, candidate_ids: list[int]
) -> np.ndarray:
    if index.config.metric == "bm25":
        return np.array(
            [
                bm25_score(
                    question,
                    index.chunks[i].contextualized,
                    index.corpus_stats,
                    index.config,
                )
                for i in candidate_ids
            ],
            dtype=np.float64,
        )
    qvec = embed(question, index.config, index.corpus_stats)
    qnorm = float(np.linalg.norm(qvec))
    scores = np.empty(len(candidate_ids), dtype=np.float64)
    rows, norms, dot = index._rows, index._norms, np.dot
    for pos, i in enumerate(candidate_ids):
        denom = qnorm * norms[i]
        scores[pos] = dot(qvec, rows[i]) / denom if denom else 0.0
    return scores
