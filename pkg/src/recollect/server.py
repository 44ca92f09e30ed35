"""HTTP facade over one engine instance.

A thin validation-and-mapping layer: every endpoint delegates to the engine
or its stores and serializes the result; no scoring or graph logic lives
here. Timestamps may ride in on requests so tests control time end to end;
when omitted they default to the server clock.
"""

from __future__ import annotations

import time

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .engine import AnswerBundle, Engine, LlmExhaustedError, UnknownSessionError
from .graph import UnknownNodeError
from .llm import LlmError


class MessageIn(BaseModel):
    text: str
    ts: int | None = None


class IngestIn(BaseModel):
    name: str
    text: str
    ts: int | None = None


def _now_ms() -> int:
    return int(time.time() * 1000)


def _error(status: int, kind: str, detail: str = "") -> JSONResponse:
    body = {"error": kind}
    if detail:
        body["detail"] = detail
    return JSONResponse(status_code=status, content=body)


def _answer_json(bundle: AnswerBundle) -> dict:
    return {
        "answer": bundle.answer,
        "iterations_used": bundle.iterations_used,
        "final_score": bundle.final_score,
        "context_sizes": [list(pair) for pair in bundle.context_sizes],
        "cited_node_ids": list(bundle.cited_node_ids),
        "cited_chunk_ids": list(bundle.cited_chunk_ids),
    }


def _node_json(node, scored=None) -> dict:
    body = {
        "id": node.id,
        "label": node.label,
        "kind": node.kind.value,
        "created_at": node.created_at,
        "last_seen": node.last_seen,
        "mention_count": node.mention_count,
    }
    if scored is not None:
        body["score"] = scored.score
        body["components"] = {
            "semantic": scored.components.semantic,
            "recency": scored.components.recency,
            "proximity": scored.components.proximity,
        }
    return body


def _edge_json(edge) -> dict:
    return {
        "src": edge.src,
        "dst": edge.dst,
        "kind": edge.kind.value,
        "created_at": edge.created_at,
        "last_seen": edge.last_seen,
        "confidence": edge.confidence,
    }


def _int_param(value: str | None, name: str) -> int | None:
    if value is None or value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise MalformedParam(name)


class MalformedParam(Exception):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="recollect", docs_url=None, redoc_url=None)

    if engine.config.ui_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[engine.config.ui_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    token = engine.config.api_token

    @app.middleware("http")
    async def _auth(request: Request, call_next):
        if token and request.url.path != "/v1/health":
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {token}":
                return _error(401, "unauthorized")
        return await call_next(request)

    @app.exception_handler(MalformedParam)
    async def _malformed(request: Request, exc: MalformedParam):
        return _error(400, "malformed_param", exc.name)

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/sessions")
    def create_session():
        session_id = engine.create_session()
        return {"session_id": session_id}

    @app.get("/v1/sessions/{session_id}/messages")
    def get_messages(session_id: str):
        try:
            messages = engine.session_messages(session_id)
        except UnknownSessionError:
            return _error(404, "unknown_session")
        return {"session_id": session_id, "messages": messages}

    @app.post("/v1/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageIn):
        if not body.text.strip():
            return _error(422, "empty_text")
        if not engine.has_session(session_id):
            return _error(404, "unknown_session")
        ts = body.ts if body.ts is not None else _now_ms()
        try:
            bundle = engine.answer(session_id, body.text, ts)
        except LlmExhaustedError:
            return _error(502, "llm_exhausted")
        except LlmError as exc:
            return _error(502, "llm_error", str(exc))
        return _answer_json(bundle)

    @app.get("/v1/graph/nodes")
    def graph_nodes(request: Request):
        params = request.query_params
        query_text = params.get("q", "")
        window_from = _int_param(params.get("from"), "from")
        window_to = _int_param(params.get("to"), "to")
        limit = _int_param(params.get("limit"), "limit") or 50
        if limit < 1:
            raise MalformedParam("limit")
        window = None
        if window_from is not None or window_to is not None:
            window = (
                window_from if window_from is not None else 0,
                window_to if window_to is not None else 2**62,
            )
        if engine.store.node_count == 0:
            return {"nodes": []}
        scored = engine.store.query_nodes(
            engine.embedder.embed(query_text), _now_ms(), limit, time_window=window
        )
        return {"nodes": [_node_json(engine.store.get_node(s.node_id), s) for s in scored]}

    @app.get("/v1/graph/nodes/{node_id}/neighborhood")
    def neighborhood(node_id: str, request: Request):
        node_key = _int_param(node_id, "node_id")
        hops = _int_param(request.query_params.get("hops"), "hops")
        hops = 1 if hops is None else hops
        if hops < 0:
            raise MalformedParam("hops")
        try:
            subgraph = engine.store.neighborhood([node_key], hops)
        except UnknownNodeError:
            return _error(404, "unknown_node")
        return {
            "nodes": [_node_json(n) for n in subgraph.nodes],
            "edges": [_edge_json(e) for e in subgraph.edges],
        }

    @app.get("/v1/events")
    def events(request: Request):
        since_seq = _int_param(request.query_params.get("since_seq"), "since_seq") or 0
        items = engine.log.events(since_seq=since_seq)
        return {
            "events": [
                {"seq": e.seq, "ts": e.ts, "kind": e.kind, "payload": e.payload} for e in items
            ]
        }

    @app.post("/v1/ingest")
    def ingest(body: IngestIn):
        if not body.name.strip():
            return _error(422, "empty_name")
        if not body.text:
            return _error(422, "empty_document")
        ts = body.ts if body.ts is not None else _now_ms()
        report = engine.ingest_document(body.name, body.text, ts)
        return {
            "doc_name": report.doc_name,
            "chunk_count": report.chunk_count,
            "concept_keys_attached": sorted(report.concept_keys_attached),
            "elapsed_ms": report.elapsed_ms,
        }

    return app
