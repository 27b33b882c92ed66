"""HTTP retrieval service for downstream SQL generators.

Endpoints:
  POST /v1/retrieve  {question, schedule_override?, max_entities?, include_timings?}
  GET  /v1/health    liveness plus the loaded schema version
  GET  /v1/stats     catalog shape and index sizes

All indexes are loaded once and never mutated, so any number of requests may
be served concurrently; a semaphore caps how many retrievals run at once and
the rest queue. Responses are deterministic for identical requests; stage
timings are only attached when a request explicitly asks for them. Shutdown
stops accepting connections and drains in-flight handlers.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .catalog import SchemaCatalog, catalog_stats
from .contextual import ChunkIndex
from .pipeline import (
    IterationSchedule,
    PipelineConfig,
    ScopeCollapsedError,
    build_query_response,
    default_schedule,
    run_pipeline,
)
from .structural import KnowledgeGraph

logger = logging.getLogger(__name__)


@dataclass
class RetrievalService:
    catalog: SchemaCatalog
    chunk_index: ChunkIndex
    graph: KnowledgeGraph
    config: PipelineConfig
    schema_version: str
    max_concurrent: int = 8
    _gate: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._gate = threading.Semaphore(self.max_concurrent)

    def retrieve(self, request_doc) -> tuple[int, dict]:
        if not isinstance(request_doc, dict):
            return 400, {"error": "request body must be a JSON object"}
        question = request_doc.get("question")
        if not isinstance(question, str) or not question.strip():
            return 400, {"error": "question must be a nonempty string"}
        try:
            if "schedule_override" in request_doc:
                schedule = IterationSchedule.from_dict(request_doc["schedule_override"])
            else:
                schedule = self.config.schedule or default_schedule(
                    len(self.catalog.tables)
                )
            max_entities = request_doc.get("max_entities")
            if max_entities is not None and (
                not isinstance(max_entities, int) or max_entities < 1
            ):
                return 400, {"error": "max_entities must be a positive integer"}
        except (KeyError, TypeError, ValueError) as exc:
            return 400, {"error": f"invalid request: {exc}"}

        with self._gate:
            try:
                output = run_pipeline(
                    question,
                    self.chunk_index,
                    self.graph,
                    self.catalog,
                    schedule,
                    self.config,
                )
            except ScopeCollapsedError as exc:
                return 422, {"error": str(exc), "step": exc.step}
        if max_entities is not None:
            output.entities = output.entities[:max_entities]
            output.tables = {e.table for e in output.entities}
        payload = build_query_response(
            output,
            self.catalog,
            self.schema_version,
            include_timings=bool(request_doc.get("include_timings")),
        )
        return 200, payload

    def health(self) -> tuple[int, dict]:
        return 200, {"status": "ok", "schema_version": self.schema_version}

    def stats(self) -> tuple[int, dict]:
        stats = catalog_stats(self.catalog)
        return 200, {
            "schema_version": self.schema_version,
            "table_count": stats.table_count,
            "column_count": stats.column_count,
            "median_fk_per_table": stats.median_fk_per_table,
            "stddev_columns_per_table": stats.stddev_columns_per_table,
            "chunk_count": len(self.chunk_index),
            "triplet_count": len(self.graph),
        }


def make_server(service: RetrievalService, host: str, port: int) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server bound to host:port."""

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # route through logging, not stderr
            logger.debug("%s %s", self.address_string(), fmt % args)

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            # One request per connection: idle keep-alive sockets would pin
            # handler threads and stall the drain on shutdown.
            self.send_header("Connection", "close")
            self.close_connection = True
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self) -> None:
            if self.path == "/v1/health":
                self._send(*service.health())
            elif self.path == "/v1/stats":
                self._send(*service.stats())
            else:
                self._send(404, {"error": f"unknown path {self.path}"})

        def do_POST(self) -> None:
            if self.path != "/v1/retrieve":
                self._send(404, {"error": f"unknown path {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                raw = self.rfile.read(length)
                doc = json.loads(raw) if raw else {}
            except (ValueError, json.JSONDecodeError) as exc:
                self._send(400, {"error": f"malformed request body: {exc}"})
                return
            self._send(*service.retrieve(doc))

    server = ThreadingHTTPServer((host, port), Handler)
    server.daemon_threads = False  # join in-flight handlers on close
    return server


def serve_forever(service: RetrievalService, host: str, port: int) -> None:
    server = make_server(service, host, port)
    logger.info("serving on %s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
