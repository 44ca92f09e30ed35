"""The answer engine: capture turns, retrieve context, reflect until accepted.

Each user query is recorded into the concept graph first (so self-referential
questions see their own turn), then the engine loops: retrieve graph+vector
context, draft an answer, have the critic score it, and widen retrieval on
rejection. The loop stops at acceptance or at the iteration cap, returning
the best-scored draft. Every mutation and every reflection step lands in the
event log.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from dataclasses import dataclass
from importlib import resources

from .config import EngineConfig
from .embedding import DeterministicEmbedder, RemoteEmbedder
from .events import EventLog, state_hash
from .extraction import GraphDelta, delta_from_extractor_payload, fallback_extract
from .graph import EdgeKind, GraphStore, NodeKind, ScoredNode, Subgraph, UnknownNodeError
from .ingest import IngestReport, ingest_document
from .llm import (
    ChatMessage,
    HttpBackend,
    LlmClient,
    LlmError,
    LlmRole,
    ScriptedBackend,
    parse_json_payload,
)
from .textutil import canonical_key
from .vectors import VectorIndex

logger = logging.getLogger(__name__)

MENTION_CONFIDENCE = 1.0


class UnknownSessionError(LookupError):
    """Operation referenced a session id the engine has never seen."""


class LlmExhaustedError(LlmError):
    """The answerer failed on every reflection iteration."""


@dataclass(frozen=True)
class Critique:
    score: float
    missing: tuple[str, ...]


@dataclass(frozen=True)
class ChunkHit:
    chunk_id: int
    cosine: float
    text: str


@dataclass(frozen=True)
class ContextBundle:
    scored_nodes: tuple[ScoredNode, ...]
    subgraph: Subgraph
    chunks: tuple[ChunkHit, ...]
    iteration: int

    @property
    def node_ids(self) -> frozenset[int]:
        return frozenset(s.node_id for s in self.scored_nodes) | self.subgraph.node_ids

    @property
    def chunk_ids(self) -> tuple[int, ...]:
        return tuple(c.chunk_id for c in self.chunks)


@dataclass(frozen=True)
class AnswerBundle:
    answer: str
    iterations_used: int
    final_score: float
    context_sizes: tuple[tuple[int, int], ...]
    cited_node_ids: tuple[int, ...]
    cited_chunk_ids: tuple[int, ...]


@dataclass
class SessionRecord:
    session_id: str
    created_at: int
    turn_count: int = 0


class _SessionState:
    def __init__(self, session_id: str, created_at: int):
        self.record = SessionRecord(session_id=session_id, created_at=created_at)
        self.turn_texts: list[str] = []
        self.turn_node_ids: list[int] = []
        self.messages: list[dict] = []
        self.last_attempts: list[tuple[str, Critique, ContextBundle]] = []
        self.lock = threading.RLock()


def _load_prompt(name: str) -> str:
    return resources.files("recollect.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def build_embedder(config: EngineConfig):
    spec = config.embedder
    if spec.provider == "deterministic":
        return DeterministicEmbedder(dimension=spec.dimension)
    if spec.provider == "remote":
        if not spec.endpoint:
            raise ValueError("remote embedder requires an endpoint")
        return RemoteEmbedder(endpoint=spec.endpoint, dimension=spec.dimension, timeout=spec.timeout)
    raise ValueError(f"unknown embedder provider {spec.provider!r}")


def build_backends(config: EngineConfig) -> dict[str, object]:
    """One backend per role; mock: endpoints share a ScriptedBackend per path."""
    backends: dict[str, object] = {}
    scripted: dict[str, ScriptedBackend] = {}
    for role, role_cfg in config.roles.items():
        endpoint = role_cfg.endpoint
        if endpoint.startswith("mock:"):
            script_path = endpoint[len("mock:"):]
            if script_path not in scripted:
                scripted[script_path] = (
                    ScriptedBackend.from_jsonl(script_path) if script_path else ScriptedBackend()
                )
            backends[role] = scripted[script_path]
        else:
            backends[role] = HttpBackend(endpoint, bearer_token=config.llm.bearer_token)
    return backends


class Engine:
    """One assistant instance: graph memory, vector memory, LLM pipeline."""

    def __init__(
        self,
        config: EngineConfig | None = None,
        llm_client: LlmClient | None = None,
        event_log: EventLog | None = None,
    ):
        self.config = config or EngineConfig()
        self.embedder = build_embedder(self.config)
        self.store = GraphStore(
            weights=self.config.weights,
            tau_ms=self.config.tau_ms,
            merge_threshold=self.config.merge_threshold,
            proximity_hop_cap=self.config.proximity_hop_cap,
        )
        self.index = VectorIndex(dimension=self.config.embedder.dimension)
        self.log = event_log or EventLog(self.config.event_log_path or None)
        self.llm = llm_client or LlmClient(
            roles=self.config.roles,
            backends=build_backends(self.config),
            settings=self.config.llm,
        )
        self._prompts = {name: _load_prompt(name) for name in ("extractor", "answerer", "critic")}
        self._sessions: dict[str, _SessionState] = {}
        self._sessions_lock = threading.Lock()
        self._ingest_locks: dict[str, threading.Lock] = {}

    # -- sessions ------------------------------------------------------------

    def create_session(self, session_id: str | None = None, created_at: int | None = None) -> str:
        session_id = session_id or uuid.uuid4().hex
        created = created_at if created_at is not None else int(time.time() * 1000)
        with self._sessions_lock:
            if session_id not in self._sessions:
                self._sessions[session_id] = _SessionState(session_id, created)
        return session_id

    def has_session(self, session_id: str) -> bool:
        with self._sessions_lock:
            return session_id in self._sessions

    def session_record(self, session_id: str) -> SessionRecord:
        return self._session(session_id).record

    def session_messages(self, session_id: str) -> list[dict]:
        state = self._session(session_id)
        with state.lock:
            return [dict(m) for m in state.messages]

    def last_answer_attempts(self, session_id: str) -> list[tuple[str, Critique, ContextBundle]]:
        """Per-iteration (draft, critique, bundle) of the session's last answer."""
        state = self._session(session_id)
        with state.lock:
            return list(state.last_attempts)

    def _session(self, session_id: str) -> _SessionState:
        with self._sessions_lock:
            state = self._sessions.get(session_id)
        if state is None:
            raise UnknownSessionError(f"unknown session {session_id!r}")
        return state

    # -- capture ---------------------------------------------------------------

    def record_turn(self, session_id: str, text: str, ts: int) -> GraphDelta:
        """Store one turn: a Turn node, extracted concept nodes, and edges.

        The extractor LLM provides the delta; any failure or unusable output
        falls back to the deterministic rule (logged, never an error).
        """
        if not text.strip():
            raise ValueError("turn text must be non-empty")
        state = self._session(session_id)
        with state.lock:
            delta = self._extract(session_id, text, ts)
            self._apply_delta(state, delta, text, ts)
            return delta

    def _extract(self, session_id: str, text: str, ts: int) -> GraphDelta:
        sink = self._error_sink(ts)
        try:
            completion = self.llm.complete(
                LlmRole.EXTRACTOR,
                [
                    ChatMessage("system", self._prompts["extractor"]),
                    ChatMessage("user", text),
                ],
                event_sink=sink,
            )
            payload = parse_json_payload(completion.text)
            return delta_from_extractor_payload(payload, text)
        except (LlmError, ValueError, TypeError) as exc:
            self.log.append(
                "fallback_extract",
                ts,
                {"session_id": session_id, "reason": type(exc).__name__},
            )
            return fallback_extract(text)

    def _apply_delta(self, state: _SessionState, delta: GraphDelta, text: str, ts: int) -> None:
        session_id = state.record.session_id
        turn_id = self._upsert(text, NodeKind.TURN, ts, session_id)

        ids_by_key: dict[str, int] = {}
        for label, kind in delta.nodes:
            node_id = self._upsert(label, kind, ts, session_id)
            ids_by_key[canonical_key(label)] = node_id

        for src_label, dst_label, kind, confidence in delta.edges:
            src = self._resolve_label(src_label, ids_by_key)
            dst = self._resolve_label(dst_label, ids_by_key)
            if src is None or dst is None or src == dst:
                continue
            self._add_edge(src, dst, kind, ts, confidence)

        for node_id in sorted(set(ids_by_key.values())):
            if node_id != turn_id:
                self._add_edge(turn_id, node_id, EdgeKind.MENTIONS, ts, MENTION_CONFIDENCE)

        state.turn_texts.append(text)
        state.turn_node_ids.append(turn_id)
        state.record.turn_count += 1
        self.log.append(
            "turn_recorded",
            ts,
            {"session_id": session_id, "ts": ts, "turn_node_id": turn_id, "text": text},
        )
        if self.config.prune.max_nodes is not None:
            self.store.prune(self.config.prune.max_nodes)

    def _upsert(self, label: str, kind: NodeKind, ts: int, session_id: str) -> int:
        embedding = self.embedder.embed(label)
        node_id = self.store.upsert_node(label, kind, embedding, ts, session_id)
        self.log.append(
            "node_upserted",
            ts,
            {
                "label": label,
                "kind": kind.value,
                "embedding": [float(x) for x in embedding],
                "ts": ts,
                "session_id": session_id,
            },
        )
        return node_id

    def _add_edge(self, src: int, dst: int, kind: EdgeKind, ts: int, confidence: float) -> None:
        self.store.add_edge(src, dst, kind, ts, confidence)
        self.log.append(
            "edge_added",
            ts,
            {"src": src, "dst": dst, "kind": kind.value, "ts": ts, "confidence": confidence},
        )

    def _resolve_label(self, label: str, ids_by_key: dict[str, int]) -> int | None:
        key = canonical_key(label)
        if key in ids_by_key:
            return ids_by_key[key]
        for kind in (NodeKind.ENTITY, NodeKind.TOPIC, NodeKind.PREFERENCE, NodeKind.TURN):
            node = self.store.find_node(label, kind)
            if node is not None:
                return node.id
        return None

    # -- retrieval -------------------------------------------------------------

    def retrieve_context(self, session_id: str, query_text: str, now: int, iteration: int) -> ContextBundle:
        """Graph-first context gathering; each iteration doubles its appetite."""
        if iteration < 0:
            raise ValueError("iteration must be >= 0")
        state = self._session(session_id)
        retrieval = self.config.retrieval
        k_nodes = retrieval.base_nodes * (2**iteration)
        hops = retrieval.base_hops + iteration
        k_chunks = retrieval.base_chunks * (2**iteration)

        query_embedding = self.embedder.embed(query_text)
        with state.lock:
            seeds = list(state.turn_node_ids[-retrieval.seed_turns:])
        scored = self.store.query_nodes(query_embedding, now, k_nodes, seed_node_ids=seeds)

        top_ids = [s.node_id for s in scored]
        if top_ids:
            try:
                subgraph = self.store.neighborhood(top_ids, hops)
            except UnknownNodeError:
                # a concurrent prune can race retrieval; retry on current state
                top_ids = [i for i in top_ids if self._node_exists(i)]
                subgraph = self.store.neighborhood(top_ids, hops)
        else:
            subgraph = Subgraph(nodes=(), edges=())

        concept_filter = {n.canonical_key for n in subgraph.nodes if n.canonical_key}
        hits = self.index.knn(query_embedding, k_chunks, concept_filter or None)
        if not hits and concept_filter:
            hits = self.index.knn(query_embedding, k_chunks, None)
        chunks = tuple(
            ChunkHit(hit.chunk_id, hit.cosine, self.index.get_chunk(hit.chunk_id).text)
            for hit in hits
        )
        return ContextBundle(
            scored_nodes=tuple(scored), subgraph=subgraph, chunks=chunks, iteration=iteration
        )

    def _node_exists(self, node_id: int) -> bool:
        try:
            self.store.get_node(node_id)
            return True
        except UnknownNodeError:
            return False

    # -- answering ---------------------------------------------------------------

    def answer(self, session_id: str, query_text: str, now: int) -> AnswerBundle:
        """Run the reflection loop for one user query.

        Iterations widen retrieval until the critic's score clears the
        threshold or the cap is reached; on exhaustion the best-scored draft
        wins. Critic failures degrade to score 0 and the loop continues; only
        an answerer that fails every iteration is a hard error.
        """
        if not query_text.strip():
            raise ValueError("query text must be non-empty")
        state = self._session(session_id)
        reflection = self.config.reflection

        with state.lock:
            self.record_turn(session_id, query_text, now)
            state.messages.append({"role": "user", "text": query_text, "ts": now})

            attempts: list[tuple[str, Critique, ContextBundle]] = []
            context_sizes: list[tuple[int, int]] = []
            iterations_used = 0
            accepted = False

            for iteration in range(reflection.max_iterations):
                iterations_used = iteration + 1
                bundle = self.retrieve_context(session_id, query_text, now, iteration)
                context_sizes.append((len(bundle.node_ids), len(bundle.chunks)))
                try:
                    completion = self.llm.complete(
                        LlmRole.ANSWERER,
                        self._answer_messages(state, query_text, bundle),
                        event_sink=self._error_sink(now),
                    )
                except LlmError:
                    logger.warning("answerer failed on iteration %d", iteration)
                    self.log.append(
                        "reflection_step",
                        now,
                        {
                            "session_id": session_id,
                            "iteration": iteration,
                            "error": "answerer_failed",
                            "node_count": len(bundle.node_ids),
                            "chunk_count": len(bundle.chunks),
                        },
                    )
                    continue

                critique = self._run_critic(query_text, completion.text, bundle, now)
                attempts.append((completion.text, critique, bundle))
                accepted = critique.score >= reflection.threshold
                self.log.append(
                    "reflection_step",
                    now,
                    {
                        "session_id": session_id,
                        "iteration": iteration,
                        "score": critique.score,
                        "missing": list(critique.missing),
                        "node_count": len(bundle.node_ids),
                        "chunk_count": len(bundle.chunks),
                        "accepted": accepted,
                    },
                )
                if accepted:
                    break

            state.last_attempts = attempts
            if not attempts:
                raise LlmExhaustedError("answerer failed on every reflection iteration")

            best_text, best_critique, best_bundle = max(attempts, key=lambda a: a[1].score)

            self.record_turn(session_id, best_text, now)
            state.messages.append(
                {
                    "role": "assistant",
                    "text": best_text,
                    "ts": now,
                    "iterations_used": iterations_used,
                    "final_score": best_critique.score,
                }
            )
            self.log.append(
                "answer_generated",
                now,
                {
                    "session_id": session_id,
                    "query": query_text,
                    "answer": best_text,
                    "iterations_used": iterations_used,
                    "final_score": best_critique.score,
                },
            )
            return AnswerBundle(
                answer=best_text,
                iterations_used=iterations_used,
                final_score=best_critique.score,
                context_sizes=tuple(context_sizes),
                cited_node_ids=tuple(sorted(best_bundle.node_ids)),
                cited_chunk_ids=tuple(sorted(best_bundle.chunk_ids)),
            )

    def _answer_messages(self, state: _SessionState, query: str, bundle: ContextBundle) -> list[ChatMessage]:
        history = state.turn_texts[-self.config.retrieval.history_turns:]
        labels = {n.id: n.label for n in bundle.subgraph.nodes}
        lines = ["Recent turns:"]
        lines.extend(history)
        lines.append("")
        lines.append("Concept graph:")
        lines.extend(sorted(labels.values()))
        for edge in bundle.subgraph.edges:
            lines.append(f"{labels[edge.src]} —[{edge.kind.value}]→ {labels[edge.dst]}")
        lines.append("")
        lines.append("Notes:")
        for chunk in bundle.chunks:
            lines.append(chunk.text)
        lines.append("")
        lines.append(f"Question: {query}")
        return [
            ChatMessage("system", self._prompts["answerer"]),
            ChatMessage("user", "\n".join(lines)),
        ]

    def _run_critic(self, query: str, answer_text: str, bundle: ContextBundle, now: int) -> Critique:
        summary = (
            f"{len(bundle.node_ids)} graph nodes, {len(bundle.chunks)} note chunks; "
            f"concepts: {', '.join(sorted(n.label for n in bundle.subgraph.nodes)[:12])}"
        )
        content = (
            f"Question: {query}\n\nDraft answer: {answer_text}\n\nContext summary: {summary}\n\n"
            'Reply with JSON {"score": <0..1>, "missing": [...]}'
        )
        try:
            completion = self.llm.complete(
                LlmRole.CRITIC,
                [ChatMessage("system", self._prompts["critic"]), ChatMessage("user", content)],
                event_sink=self._error_sink(now),
            )
            payload = parse_json_payload(completion.text)
            score = float(payload.get("score", 0.0))
            score = min(1.0, max(0.0, score))
            missing = tuple(str(item) for item in payload.get("missing", []) or [])
            return Critique(score=score, missing=missing)
        except (LlmError, ValueError, TypeError):
            return Critique(score=0.0, missing=("critic-unparseable",))

    # -- ingestion -----------------------------------------------------------------

    def ingest_document(self, name: str, text: str, ts: int) -> IngestReport:
        with self._sessions_lock:
            lock = self._ingest_locks.setdefault(name, threading.Lock())
        with lock:
            return ingest_document(
                name,
                text,
                ts,
                embedder=self.embedder,
                index=self.index,
                log=self.log,
                size=self.config.chunking.size,
                overlap=self.config.chunking.overlap,
            )

    # -- lifecycle -------------------------------------------------------------------

    def _error_sink(self, ts: int):
        return lambda payload: self.log.append("llm_error", ts, payload)

    def state_hash(self) -> str:
        return state_hash(self.store, self.index)

    @property
    def scripted_backend(self) -> ScriptedBackend | None:
        for backend in self.llm.backends.values():
            if isinstance(backend, ScriptedBackend):
                return backend
        return None

    def close(self) -> None:
        """Seal the event log with the final state digest."""
        self.log.write_footer(self.state_hash())
        self.log.close()
