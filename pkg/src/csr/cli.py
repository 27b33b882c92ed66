"""Command-line surface: index, query, eval, bench, serve.

Errors print one machine-parseable JSON line to stderr. Exit codes: 0 on
success, 2 for validation or I/O failures, 3 when the retrieval scope
collapses.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .artifacts import ArtifactError, load_index, save_index
from .catalog import CatalogError, load_catalog
from .contextual import build_chunk_index
from .evaluation import (
    default_sweep_schedules,
    latency_bench,
    run_sweep,
    split_trace,
    write_sweep_csv,
)
from .pipeline import (
    IterationSchedule,
    PipelineConfig,
    ScopeCollapsedError,
    build_query_response,
    default_schedule,
    load_pipeline_config,
    run_pipeline,
)
from .service import RetrievalService, serve_forever
from .structural import build_knowledge_graph
from .synthetic import GeneratorProfile, ProfileError, generate_synthetic

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_SCOPE_COLLAPSED = 3

EMBEDDER_ENDPOINT_ENV = "CSR_EMBEDDER_ENDPOINT"


def _fail(code: int, **fields) -> int:
    print(json.dumps(fields, sort_keys=True), file=sys.stderr)
    return code


def _load_trace(path: str | Path) -> list[dict]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if "question" not in doc or "sql" not in doc:
                raise ValueError(f"{path}:{line_no}: trace entry needs question and sql")
            entries.append(doc)
    if not entries:
        raise ValueError(f"{path}: empty trace")
    return entries


def _load_config(path: str | None) -> PipelineConfig:
    config = load_pipeline_config(path) if path else PipelineConfig()
    endpoint = os.environ.get(EMBEDDER_ENDPOINT_ENV)
    if endpoint:
        config.similarity = dataclasses.replace(
            config.similarity, external_endpoint=endpoint
        )
    return config


def _prepare_inputs(args) -> tuple:
    """Resolve (catalog, trace) from --schema/--trace files or --profile."""
    if args.schema and args.trace:
        catalog = load_catalog(args.schema)
        trace = _load_trace(args.trace)
        return catalog, trace
    profile_doc = {}
    if args.profile:
        with open(args.profile, encoding="utf-8") as fh:
            profile_doc = json.load(fh)
    if getattr(args, "seed", None) is not None:
        profile_doc["seed"] = args.seed
    profile = GeneratorProfile.from_dict(profile_doc)
    return generate_synthetic(profile)


def cmd_index(args) -> int:
    try:
        config = _load_config(args.config)
        catalog = load_catalog(args.schema)
        trace = _load_trace(args.trace)
        chunk_index = build_chunk_index(trace, catalog, config.similarity)
        graph = build_knowledge_graph(catalog, config.similarity)
        manifest = save_index(args.out, catalog, chunk_index, graph, config)
    except FileNotFoundError as exc:
        return _fail(EXIT_ERROR, error="file not found", path=str(exc.filename))
    except (CatalogError, ValueError, OSError) as exc:
        return _fail(EXIT_ERROR, error=str(exc))
    print(
        json.dumps(
            {
                "out": str(args.out),
                "artifacts": sorted(manifest["artifacts"]),
                "schema_version": manifest["schema_version"],
            }
        )
    )
    return EXIT_OK


def _parse_schedule_flag(text: str) -> IterationSchedule:
    """Parse ``k,l,h;k,l,h;...`` into a schedule."""
    steps = []
    for part in text.split(";"):
        nums = [int(x) for x in part.split(",")]
        if len(nums) != 3:
            raise ValueError(f"schedule step '{part}' must be k,l,h")
        steps.append(tuple(nums))
    return IterationSchedule(steps=tuple(steps))


def cmd_query(args) -> int:
    try:
        catalog, chunk_index, graph, config, manifest = load_index(args.index)
    except ArtifactError as exc:
        return _fail(EXIT_ERROR, error=str(exc))
    if not args.question.strip():
        return _fail(EXIT_ERROR, error="question must be nonempty")
    try:
        if args.schedule:
            schedule = _parse_schedule_flag(args.schedule)
        else:
            schedule = config.schedule or default_schedule(len(catalog.tables))
        output = run_pipeline(
            args.question, chunk_index, graph, catalog, schedule, config
        )
    except ScopeCollapsedError as exc:
        return _fail(EXIT_SCOPE_COLLAPSED, error=str(exc), iteration=exc.step)
    except ValueError as exc:
        return _fail(EXIT_ERROR, error=str(exc))
    if args.max_entities is not None:
        output.entities = output.entities[: args.max_entities]
        output.tables = {e.table for e in output.entities}
    if args.tables_only:
        for name in sorted(catalog.table(t).name for t in output.tables):
            print(name)
        return EXIT_OK
    payload = build_query_response(
        output, catalog, manifest["schema_version"], include_timings=args.timings
    )
    print(json.dumps(payload))
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        config = _load_config(args.config)
        catalog, trace = _prepare_inputs(args)
        if args.schedules:
            with open(args.schedules, encoding="utf-8") as fh:
                schedules = [IterationSchedule.from_dict(d) for d in json.load(fh)]
        else:
            schedules = default_sweep_schedules(len(catalog.tables))
        rows = run_sweep(catalog, trace, schedules, config, args.hold_out_every)
        write_sweep_csv(rows, args.out, group=args.group)
    except FileNotFoundError as exc:
        return _fail(EXIT_ERROR, error="file not found", path=str(exc.filename))
    except (CatalogError, ProfileError, ValueError, OSError) as exc:
        return _fail(EXIT_ERROR, error=str(exc))
    print(json.dumps({"out": str(args.out), "rows": len(rows)}))
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        config = _load_config(args.config)
        catalog, trace = _prepare_inputs(args)
        build, held = split_trace(trace)
        chunk_index = build_chunk_index(build, catalog, config.similarity)
        graph = build_knowledge_graph(catalog, config.similarity)
        schedule = config.schedule or default_schedule(len(catalog.tables))
        report = latency_bench(
            chunk_index,
            graph,
            catalog,
            schedule,
            config,
            [e["question"] for e in held],
            repetitions=args.repetitions,
        )
    except FileNotFoundError as exc:
        return _fail(EXIT_ERROR, error="file not found", path=str(exc.filename))
    except (CatalogError, ProfileError, ValueError, OSError) as exc:
        return _fail(EXIT_ERROR, error=str(exc))
    doc = report.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2), encoding="utf-8")
    print(json.dumps(doc))
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        catalog, chunk_index, graph, config, manifest = load_index(args.index)
    except ArtifactError as exc:
        return _fail(EXIT_ERROR, error=str(exc))
    host, _, port_text = args.bind.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        return _fail(EXIT_ERROR, error=f"invalid bind address '{args.bind}'")
    service = RetrievalService(
        catalog=catalog,
        chunk_index=chunk_index,
        graph=graph,
        config=config,
        schema_version=manifest["schema_version"],
        max_concurrent=args.max_concurrent,
    )
    serve_forever(service, host or "127.0.0.1", port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csr",
        description="Schema retrieval for text-to-SQL: index, query, evaluate, "
        "benchmark, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and persist index artifacts")
    p.add_argument("--schema", required=True, help="schema document (JSON)")
    p.add_argument("--trace", required=True, help="question/SQL trace (JSONL)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="pipeline config (JSON)")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="retrieve tables and join columns")
    p.add_argument("--index", required=True, help="index directory")
    p.add_argument("question")
    p.add_argument("--tables-only", action="store_true")
    p.add_argument("--timings", action="store_true", help="include stage timings")
    p.add_argument("--schedule", help="override schedule: k,l,h;k,l,h;...")
    p.add_argument("--max-entities", type=int)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="sweep schedules and write a results CSV")
    p.add_argument("--schema")
    p.add_argument("--trace")
    p.add_argument("--profile", help="generator profile JSON (synthetic inputs)")
    p.add_argument("--seed", type=int, help="override generator seed")
    p.add_argument("--config", help="pipeline config (JSON)")
    p.add_argument("--schedules", help="JSON list of schedules to sweep")
    p.add_argument("--hold-out-every", type=int, default=4)
    p.add_argument("--group", default="default", help="group label for the CSV")
    p.add_argument("--out", required=True, help="results CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="measure end-to-end retrieval latency")
    p.add_argument("--schema")
    p.add_argument("--trace")
    p.add_argument("--profile", help="generator profile JSON (synthetic inputs)")
    p.add_argument("--seed", type=int, help="override generator seed")
    p.add_argument("--config", help="pipeline config (JSON)")
    p.add_argument("--repetitions", type=int, default=200)
    p.add_argument("--out", help="latency report JSON path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the retrieval HTTP service")
    p.add_argument("--index", required=True, help="index directory")
    p.add_argument("--bind", default="127.0.0.1:8080")
    p.add_argument("--max-concurrent", type=int, default=8)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
