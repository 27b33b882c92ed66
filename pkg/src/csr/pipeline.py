"""End-to-end retrieval: iterative narrowing, then join-candidate ranking.

Each iteration runs the contextual and structural retrievers (concurrently
by default; they share only immutable inputs) restricted to the previous
iteration's table scope, then combines their table sets. Parameters shrink
across iterations, so the scope chain is non-increasing. After the last
iteration the relational ranker builds a hypergraph over the final scope
and emits the top table.column join candidates.

Outputs are deterministic for fixed inputs regardless of whether the two
first-stage retrievals interleave; only the recorded wall-clock timings
vary between runs, and they are excluded from the canonical payload.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .catalog import SchemaCatalog, TableId, lookup_table
from .contextual import ChunkIndex, retrieve_contextual
from .relational import RankingConfig, SemanticEntity, build_hypergraph, hypergraph_rank
from .similarity import SimilarityConfig
from .structural import KnowledgeGraph, retrieve_structural


class ScopeCollapsedError(RuntimeError):
    """The combined table scope became empty at some iteration.

    Carries the 1-based step number and the stage traces recorded up to and
    including the collapsing iteration.
    """

    def __init__(self, step: int, per_stage: list["StageTrace"] | None = None):
        super().__init__(f"scope collapsed at iteration {step}")
        self.step = step
        self.per_stage = per_stage or []


@dataclass(frozen=True)
class IterationSchedule:
    steps: tuple[tuple[int, int, int], ...]  # (k, l, h) per iteration
    scope_combine: str = "union"  # union | intersection

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("schedule needs at least one step")
        if self.scope_combine not in ("union", "intersection"):
            raise ValueError(f"unknown scope_combine '{self.scope_combine}'")
        for k, l, h in self.steps:
            if k < 1 or l < 1 or h < 1:
                raise ValueError("schedule parameters must be >= 1")
        ks = [s[0] for s in self.steps]
        ls = [s[1] for s in self.steps]
        if any(later > earlier for later, earlier in zip(ks[1:], ks)):
            raise ValueError("k values must be non-increasing across steps")
        if any(later > earlier for later, earlier in zip(ls[1:], ls)):
            raise ValueError("l values must be non-increasing across steps")

    @staticmethod
    def from_dict(doc: dict) -> "IterationSchedule":
        return IterationSchedule(
            steps=tuple(tuple(step) for step in doc["steps"]),
            scope_combine=doc.get("scope_combine", "union"),
        )

    def to_dict(self) -> dict:
        return {
            "steps": [list(s) for s in self.steps],
            "scope_combine": self.scope_combine,
        }


@dataclass
class PipelineConfig:
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    ranking: RankingConfig = field(default_factory=RankingConfig)
    schedule: IterationSchedule | None = None
    contextual_scope_mode: str = "intersect"  # intersect | filter_chunks
    unavailable_tables: tuple[str, ...] = ()
    parallel: bool = True

    @staticmethod
    def from_dict(doc: dict) -> "PipelineConfig":
        sim = SimilarityConfig(**doc.get("similarity", {}))
        ranking = RankingConfig(**doc.get("ranking", {}))
        schedule = None
        if "schedule" in doc:
            schedule = IterationSchedule.from_dict(doc["schedule"])
        return PipelineConfig(
            similarity=sim,
            ranking=ranking,
            schedule=schedule,
            contextual_scope_mode=doc.get("contextual_scope_mode", "intersect"),
            unavailable_tables=tuple(doc.get("unavailable_tables", ())),
            parallel=bool(doc.get("parallel", True)),
        )

    def to_dict(self) -> dict:
        doc = {
            "similarity": {
                "metric": self.similarity.metric,
                "embedder": self.similarity.embedder,
                "dimension": self.similarity.dimension,
                "bm25_k1": self.similarity.bm25_k1,
                "bm25_b": self.similarity.bm25_b,
            },
            "ranking": {
                "h": self.ranking.h,
                "operator": self.ranking.operator,
                "weight_mode": self.ranking.weight_mode,
            },
            "contextual_scope_mode": self.contextual_scope_mode,
            "unavailable_tables": list(self.unavailable_tables),
            "parallel": self.parallel,
        }
        if self.similarity.external_endpoint:
            doc["similarity"]["external_endpoint"] = self.similarity.external_endpoint
        if self.schedule is not None:
            doc["schedule"] = self.schedule.to_dict()
        return doc


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        return PipelineConfig.from_dict(json.load(fh))


@dataclass
class StageTrace:
    iteration: int  # 1-based
    contextual_tables: set[TableId]
    structural_tables: set[TableId]
    scope: set[TableId]


@dataclass
class RetrievalOutput:
    entities: list[SemanticEntity]
    tables: set[TableId]
    per_stage: list[StageTrace]
    timings: dict[str, int]  # stage -> microseconds


def run_pipeline(
    question: str,
    chunk_index: ChunkIndex,
    graph: KnowledgeGraph,
    catalog: SchemaCatalog,
    schedule: IterationSchedule,
    config: PipelineConfig,
) -> RetrievalOutput:
    """Run the full iterative retrieval for one question."""
    unavailable = _resolve_unavailable(config.unavailable_tables, catalog)
    timings = {"contextual": 0, "structural": 0, "relational": 0}
    per_stage: list[StageTrace] = []
    scope: set[TableId] | None = None
    start_total = time.perf_counter_ns()

    pool = ThreadPoolExecutor(max_workers=2) if config.parallel else None
    try:
        for step_no, (k, l, _h) in enumerate(schedule.steps, start=1):

            def run_contextual(
                k: int = k, scope: set[TableId] | None = scope
            ) -> tuple[set[TableId], int]:
                t0 = time.perf_counter_ns()
                result = retrieve_contextual(
                    chunk_index, question, k, scope, config.contextual_scope_mode
                )
                return result.tables, time.perf_counter_ns() - t0

            def run_structural(
                l: int = l, scope: set[TableId] | None = scope
            ) -> tuple[set[TableId], int]:
                t0 = time.perf_counter_ns()
                result = retrieve_structural(graph, question, l, scope)
                return result.tables, time.perf_counter_ns() - t0

            if pool is not None:
                ctx_future = pool.submit(run_contextual)
                str_future = pool.submit(run_structural)
                ctx_tables, ctx_ns = ctx_future.result()
                str_tables, str_ns = str_future.result()
            else:
                ctx_tables, ctx_ns = run_contextual()
                str_tables, str_ns = run_structural()
            timings["contextual"] += ctx_ns // 1000
            timings["structural"] += str_ns // 1000

            if schedule.scope_combine == "intersection":
                combined = ctx_tables & str_tables
            else:
                combined = ctx_tables | str_tables
            per_stage.append(
                StageTrace(
                    iteration=step_no,
                    contextual_tables=ctx_tables,
                    structural_tables=str_tables,
                    scope=combined,
                )
            )
            if not combined:
                raise ScopeCollapsedError(step_no, per_stage)
            scope = combined
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    assert scope is not None
    final_h = schedule.steps[-1][2]
    t0 = time.perf_counter_ns()
    hypergraph = build_hypergraph(scope, catalog, config.ranking, unavailable)
    entities = hypergraph_rank(
        hypergraph,
        question,
        replace(config.ranking, h=final_h),
        config.similarity,
        catalog,
    )
    timings["relational"] += (time.perf_counter_ns() - t0) // 1000
    timings["total"] = (time.perf_counter_ns() - start_total) // 1000

    return RetrievalOutput(
        entities=entities,
        tables={e.table for e in entities},
        per_stage=per_stage,
        timings=timings,
    )


def _resolve_unavailable(
    names: tuple[str, ...], catalog: SchemaCatalog
) -> frozenset[TableId]:
    ids = set()
    for name in names:
        tid = lookup_table(catalog, name)
        if tid is not None:
            ids.add(tid)
    return frozenset(ids)


def default_schedule(catalog_size: int, relevant_bound: int = 8) -> IterationSchedule:
    """Three narrowing steps scaled to the catalog size.

    The final h is twice the expected relevant-set size bound, leaving the
    downstream SQL generator room for every plausible join column.
    """
    if catalog_size < 1:
        raise ValueError("catalog_size must be >= 1")
    h = max(1, 2 * relevant_bound)
    steps = (
        (max(2, catalog_size // 5), max(2, catalog_size), h),
        (max(2, catalog_size // 12), max(1, catalog_size // 4), h),
        (max(1, catalog_size // 25), max(1, catalog_size // 10), h),
    )
    return IterationSchedule(steps=steps, scope_combine="union")


def build_query_response(
    output: RetrievalOutput,
    catalog: SchemaCatalog,
    schema_version: str,
    include_timings: bool = False,
) -> dict:
    """QueryResponse payload; timing fields are opt-in because they are the
    only non-deterministic part of the output."""
    payload = {
        "entities": [
            {
                "entity": f"{catalog.table(e.table).name}.{catalog.column(e.column).name}",
                "score": e.score,
            }
            for e in output.entities
        ],
        "tables": sorted(catalog.table(t).name for t in output.tables),
        "schema_version": schema_version,
    }
    if include_timings:
        payload["stage_timings_ms"] = {
            stage: us / 1000.0 for stage, us in output.timings.items()
        }
    return payload
