"""Structural retrieval over a deterministic schema knowledge graph.

The graph holds one triplet per column: (column, "is a column of", table),
rendered as a short sentence that carries the available descriptions. No
language model is involved in construction, so rebuilding from the same
catalog always yields the same graph. Retrieval is an exhaustive similarity
scan over triplet surfaces, optionally restricted to a table scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .catalog import ColumnId, SchemaCatalog, TableId
from .similarity import (
    CorpusStats,
    SimilarityConfig,
    bm25_score,
    build_corpus_stats,
    embed,
    embed_batch,
)
from .topk import top_k_exact

RELATION_PHRASE = "is a column of"


@dataclass(frozen=True)
class Triplet:
    field: ColumnId
    table: TableId
    surface: str


@dataclass
class KnowledgeGraph:
    triplets: list[Triplet]
    config: SimilarityConfig
    corpus_stats: CorpusStats
    vectors: np.ndarray  # (len(triplets), dimension)
    # Pre-materialized rows and norms for the per-query exhaustive scan.
    _rows: list[np.ndarray] = field(default_factory=list, repr=False)
    _norms: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if not self._rows:
            self._rows = [self.vectors[i] for i in range(len(self.triplets))]
            self._norms = [float(np.linalg.norm(r)) for r in self._rows]

    def __len__(self) -> int:
        return len(self.triplets)


@dataclass
class StructuralResult:
    ranked_triplets: list[tuple[int, float]]  # (triplet index, score)
    tables: set[TableId]


def triplet_surface(
    column_name: str,
    table_name: str,
    column_description: str = "",
    table_description: str = "",
) -> str:
    parts = [f"{column_name} {RELATION_PHRASE} {table_name}."]
    if column_description:
        parts.append(column_description)
    if table_description:
        parts.append(table_description)
    return " ".join(parts)


def build_knowledge_graph(
    catalog: SchemaCatalog, config: SimilarityConfig
) -> KnowledgeGraph:
    """One triplet per catalog column, in (table, column) order, embedded."""
    triplets: list[Triplet] = []
    surfaces: list[str] = []
    for table in catalog.tables:
        for col in table.columns:
            surface = triplet_surface(
                col.name, table.name, col.description, table.description
            )
            triplets.append(Triplet(field=col.id, table=table.id, surface=surface))
            surfaces.append(surface)

    stats = build_corpus_stats(surfaces)
    vectors = embed_batch(surfaces, config, stats)
    return KnowledgeGraph(
        triplets=triplets, config=config, corpus_stats=stats, vectors=vectors
    )


def retrieve_structural(
    graph: KnowledgeGraph,
    question: str,
    l: int,
    scope: set[TableId] | None = None,
) -> StructuralResult:
    """Top-l triplets by similarity between the question and each surface.

    A scope restricts the candidate triplets to in-scope tables before
    ranking; ties break by ascending (table, column), which is the triplet
    construction order. ``l`` at or beyond the candidate count returns all.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    if scope is None:
        candidate_ids = list(range(len(graph.triplets)))
    else:
        candidate_ids = [
            i for i, t in enumerate(graph.triplets) if t.table in scope
        ]

    scores = _score_triplets(graph, question, candidate_ids)
    ranked = top_k_exact(scores, candidate_ids, l)
    tables = {graph.triplets[i].table for i, _ in ranked}
    return StructuralResult(ranked_triplets=ranked, tables=tables)


def _score_triplets(
    graph: KnowledgeGraph, question: str, candidate_ids: list[int]
) -> np.ndarray:
    if graph.config.metric == "bm25":
        return np.array(
            [
                bm25_score(
                    question,
                    graph.triplets[i].surface,
                    graph.corpus_stats,
                    graph.config,
                )
                for i in candidate_ids
            ],
            dtype=np.float64,
        )
    qvec = embed(question, graph.config, graph.corpus_stats)
    qnorm = float(np.linalg.norm(qvec))
    scores = np.empty(len(candidate_ids), dtype=np.float64)
    rows, norms, dot = graph._rows, graph._norms, np.dot
    for pos, i in enumerate(candidate_ids):
        denom = qnorm * norms[i]
        scores[pos] = dot(qvec, rows[i]) / denom if denom else 0.0
    return scores


def export_triplets(graph: KnowledgeGraph, catalog: SchemaCatalog) -> list[dict]:
    """Inspection dump: one {column, table, surface} record per triplet."""
    return [
        {
            "column": catalog.column(t.field).name,
            "table": catalog.table(t.table).name,
            "surface": t.surface,
        }
        for t in graph.triplets
    ]
