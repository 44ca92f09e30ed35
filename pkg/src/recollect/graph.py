"""Temporal concept-graph store.

Nodes are ideas/entities/preferences/turns extracted from conversation, edges
are typed associations between them; both carry created_at/last_seen
timestamps supplied by the caller (the store never reads a wall clock, so any
sequence of operations replays identically). Retrieval scores every node by a
weighted blend of semantic similarity, recency decay, and graph proximity to
seed nodes, with deterministic ordering throughout.
"""

from __future__ import annotations

import math
import threading
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple

import numpy as np

from .config import DEFAULT_MERGE_THRESHOLD, DEFAULT_PROXIMITY_HOP_CAP, DEFAULT_TAU_MS, ScoringWeights
from .embedding import cosine
from .textutil import canonical_key

_NORM_TOLERANCE = 1e-9


class NodeKind(str, Enum):
    ENTITY = "Entity"
    TOPIC = "Topic"
    PREFERENCE = "Preference"
    TURN = "Turn"

    @classmethod
    def coerce(cls, value: "NodeKind | str") -> "NodeKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            # tolerate lowercase/uppercase spellings from LLM output
            for member in cls:
                if member.value.lower() == str(value).lower():
                    return member
            raise


class EdgeKind(str, Enum):
    RELATES_TO = "RELATES_TO"
    PREFERS = "PREFERS"
    MENTIONS = "MENTIONS"
    FOLLOWS_UP = "FOLLOWS_UP"
    ABOUT = "ABOUT"

    @classmethod
    def coerce(cls, value: "EdgeKind | str") -> "EdgeKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise


class UnknownNodeError(LookupError):
    """An operation referenced a node id that is not in the store."""


@dataclass(frozen=True)
class ConceptNode:
    id: int
    label: str
    canonical_key: str
    kind: NodeKind
    embedding: np.ndarray
    created_at: int
    last_seen: int
    mention_count: int
    session_ids: frozenset[str]


@dataclass(frozen=True)
class RelationEdge:
    id: int
    src: int
    dst: int
    kind: EdgeKind
    created_at: int
    last_seen: int
    confidence: float


class ScoreComponents(NamedTuple):
    semantic: float
    recency: float
    proximity: float


@dataclass(frozen=True)
class ScoredNode:
    node_id: int
    score: float
    components: ScoreComponents


@dataclass(frozen=True)
class Subgraph:
    nodes: tuple[ConceptNode, ...]
    edges: tuple[RelationEdge, ...]

    @property
    def node_ids(self) -> frozenset[int]:
        return frozenset(n.id for n in self.nodes)


class _NodeState:
    __slots__ = ("id", "label", "key", "kind", "embedding", "created_at", "last_seen", "mention_count", "session_ids")

    def __init__(self, node_id, label, key, kind, embedding, ts, session_id):
        self.id = node_id
        self.label = label
        self.key = key
        self.kind = kind
        self.embedding = embedding
        self.created_at = ts
        self.last_seen = ts
        self.mention_count = 1
        self.session_ids = {session_id}


class _EdgeState:
    __slots__ = ("id", "src", "dst", "kind", "created_at", "last_seen", "confidence")

    def __init__(self, edge_id, src, dst, kind, ts, confidence):
        self.id = edge_id
        self.src = src
        self.dst = dst
        self.kind = kind
        self.created_at = ts
        self.last_seen = ts
        self.confidence = confidence


def _validate_embedding(embedding: np.ndarray) -> np.ndarray:
    vec = np.asarray(embedding, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm != 0.0 and abs(norm - 1.0) > _NORM_TOLERANCE:
        raise ValueError(f"embedding must be unit-norm or zero (norm={norm})")
    vec = vec.copy()
    vec.flags.writeable = False
    return vec


class GraphStore:
    """In-memory temporal graph with merge/dedup semantics.

    Writers are serialized on an internal lock; returned values are frozen
    snapshots, so handles are safe to share across threads.
    """

    def __init__(
        self,
        weights: ScoringWeights | None = None,
        tau_ms: int = DEFAULT_TAU_MS,
        merge_threshold: float = DEFAULT_MERGE_THRESHOLD,
        proximity_hop_cap: int = DEFAULT_PROXIMITY_HOP_CAP,
    ):
        self.weights = weights or ScoringWeights()
        self.tau_ms = tau_ms
        self.merge_threshold = merge_threshold
        self.proximity_hop_cap = proximity_hop_cap
        self._lock = threading.RLock()
        self._nodes: dict[int, _NodeState] = {}
        self._by_key: dict[tuple[str, NodeKind], int] = {}
        self._edges: dict[tuple[int, int, EdgeKind], _EdgeState] = {}
        self._adjacency: dict[int, set[int]] = {}
        self._next_node_id = 1
        self._next_edge_id = 1

    # -- mutation ----------------------------------------------------------

    def upsert_node(
        self,
        label: str,
        kind: NodeKind | str,
        embedding: np.ndarray,
        ts: int,
        session_id: str,
    ) -> int:
        """Insert a concept or merge it into an existing near-duplicate.

        A node merges when its (canonical_key, kind) already exists or when a
        same-kind node's embedding has cosine >= the merge threshold; the
        earliest-created candidate survives and keeps its id and label.
        """
        if ts <= 0:
            raise ValueError("ts must be > 0")
        key = canonical_key(label)
        if not key:
            raise ValueError("label must be non-empty")
        kind = NodeKind.coerce(kind)
        vec = _validate_embedding(embedding)

        with self._lock:
            candidates = []
            exact = self._by_key.get((key, kind))
            if exact is not None:
                candidates.append(self._nodes[exact])
            same_kind = [s for s in self._nodes.values() if s.kind is kind and s.id != exact]
            if same_kind:
                # embeddings are unit or zero, so the dot product is the cosine
                sims = np.stack([s.embedding for s in same_kind]) @ vec
                candidates.extend(s for s, sim in zip(same_kind, sims) if sim >= self.merge_threshold)
            if candidates:
                target = min(candidates, key=lambda s: (s.created_at, s.id))
                target.mention_count += 1
                target.last_seen = max(target.last_seen, ts)
                target.session_ids.add(session_id)
                return target.id

            node_id = self._next_node_id
            self._next_node_id += 1
            self._nodes[node_id] = _NodeState(node_id, label, key, kind, vec, ts, session_id)
            self._by_key[(key, kind)] = node_id
            self._adjacency[node_id] = set()
            return node_id

    def add_edge(
        self,
        src: int,
        dst: int,
        kind: EdgeKind | str,
        ts: int,
        confidence: float,
    ) -> int:
        """Add a typed edge, or refresh the existing (src, dst, kind) edge."""
        kind = EdgeKind.coerce(kind)
        if not 0.0 <= confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")
        with self._lock:
            if src not in self._nodes:
                raise UnknownNodeError(f"unknown node id {src}")
            if dst not in self._nodes:
                raise UnknownNodeError(f"unknown node id {dst}")
            if src == dst:
                raise ValueError("self-loop edges are not allowed")
            existing = self._edges.get((src, dst, kind))
            if existing is not None:
                existing.last_seen = max(existing.last_seen, ts)
                existing.confidence = max(existing.confidence, confidence)
                return existing.id
            edge_id = self._next_edge_id
            self._next_edge_id += 1
            self._edges[(src, dst, kind)] = _EdgeState(edge_id, src, dst, kind, ts, confidence)
            self._adjacency[src].add(dst)
            self._adjacency[dst].add(src)
            return edge_id

    def prune(self, max_nodes: int) -> int:
        """Drop the lowest-ranked nodes until at most max_nodes remain.

        Rank is recency * mention_count; since recency only rescales by a
        factor common to all nodes, the ordering reduces to
        last_seen/tau + ln(mention_count), which needs no current time.
        """
        if max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        with self._lock:
            excess = len(self._nodes) - max_nodes
            if excess <= 0:
                return 0
            ranked = sorted(
                self._nodes.values(),
                key=lambda s: (s.last_seen / self.tau_ms + math.log(s.mention_count), s.id),
            )
            for state in ranked[:excess]:
                self._remove_node(state.id)
            return excess

    def _remove_node(self, node_id: int) -> None:
        state = self._nodes.pop(node_id)
        del self._by_key[(state.key, state.kind)]
        for edge_key in [k for k in self._edges if node_id in (k[0], k[1])]:
            del self._edges[edge_key]
        for neighbor in self._adjacency.pop(node_id, set()):
            peers = self._adjacency.get(neighbor)
            if peers is not None:
                peers.discard(node_id)

    # -- retrieval ---------------------------------------------------------

    def query_nodes(
        self,
        query_embedding: np.ndarray,
        now: int,
        k: int,
        time_window: tuple[int, int] | None = None,
        seed_node_ids: Iterable[int] | None = None,
    ) -> list[ScoredNode]:
        """Top-k nodes by blended semantic/recency/proximity score.

        Ordering is total: descending score, ties by ascending node id.
        Unknown seed ids are ignored (a seed may have been pruned since the
        caller last saw it).
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        query = np.asarray(query_embedding, dtype=np.float64)
        with self._lock:
            seeds = [s for s in (seed_node_ids or ()) if s in self._nodes]
            distances = self._bfs_distances(seeds, self.proximity_hop_cap)
            scored = []
            for state in self._nodes.values():
                if time_window is not None:
                    lo, hi = time_window
                    if not lo <= state.last_seen <= hi:
                        continue
                scored.append(self._score(state, query, now, distances))
            scored.sort(key=lambda s: (-s.score, s.node_id))
            return scored[:k]

    def _score(
        self,
        state: _NodeState,
        query: np.ndarray,
        now: int,
        seed_distances: dict[int, int],
    ) -> ScoredNode:
        semantic = (cosine(query, state.embedding) + 1.0) / 2.0
        age = max(0, now - state.last_seen)  # clock skew tolerated
        recency = math.exp(-age / self.tau_ms)
        dist = seed_distances.get(state.id)
        proximity = 1.0 / (1.0 + dist) if dist is not None else 0.0
        w = self.weights
        score = w.semantic * semantic + w.recency * recency + w.proximity * proximity
        return ScoredNode(state.id, score, ScoreComponents(semantic, recency, proximity))

    def _bfs_distances(self, seeds: list[int], hop_cap: int) -> dict[int, int]:
        distances: dict[int, int] = {}
        queue: deque[int] = deque()
        for seed in seeds:
            if seed not in distances:
                distances[seed] = 0
                queue.append(seed)
        while queue:
            current = queue.popleft()
            depth = distances[current]
            if depth >= hop_cap:
                continue
            for neighbor in self._adjacency.get(current, ()):
                if neighbor not in distances:
                    distances[neighbor] = depth + 1
                    queue.append(neighbor)
        return distances

    def neighborhood(self, node_ids: Iterable[int], hops: int) -> Subgraph:
        """Nodes within `hops` undirected steps plus all edges among them."""
        if hops < 0:
            raise ValueError("hops must be >= 0")
        with self._lock:
            roots = list(node_ids)
            for node_id in roots:
                if node_id not in self._nodes:
                    raise UnknownNodeError(f"unknown node id {node_id}")
            reached = set(self._bfs_distances(roots, hops))
            nodes = tuple(
                self._freeze_node(self._nodes[i]) for i in sorted(reached)
            )
            edges = tuple(
                self._freeze_edge(e)
                for key, e in sorted(self._edges.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value))
                if e.src in reached and e.dst in reached
            )
            return Subgraph(nodes, edges)

    # -- inspection --------------------------------------------------------

    def get_node(self, node_id: int) -> ConceptNode:
        with self._lock:
            state = self._nodes.get(node_id)
            if state is None:
                raise UnknownNodeError(f"unknown node id {node_id}")
            return self._freeze_node(state)

    def find_node(self, label: str, kind: NodeKind | str) -> ConceptNode | None:
        with self._lock:
            node_id = self._by_key.get((canonical_key(label), NodeKind.coerce(kind)))
            return self._freeze_node(self._nodes[node_id]) if node_id is not None else None

    @property
    def node_count(self) -> int:
        with self._lock:
            return len(self._nodes)

    @property
    def edge_count(self) -> int:
        with self._lock:
            return len(self._edges)

    def nodes(self) -> list[ConceptNode]:
        with self._lock:
            return [self._freeze_node(self._nodes[i]) for i in sorted(self._nodes)]

    def edges(self) -> list[RelationEdge]:
        with self._lock:
            ordered = sorted(self._edges.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value))
            return [self._freeze_edge(e) for _, e in ordered]

    def snapshot(self) -> dict:
        """Canonical JSON-able state: nodes by id, edges by (src, dst, kind).

        Edge ids are assignment bookkeeping, not state; identity on the wire
        is (src, dst, kind), so ids are omitted and the digest is insensitive
        to edge insertion order.
        """
        with self._lock:
            return {
                "nodes": [
                    {
                        "id": s.id,
                        "label": s.label,
                        "canonical_key": s.key,
                        "kind": s.kind.value,
                        "embedding": [float(x) for x in s.embedding],
                        "created_at": s.created_at,
                        "last_seen": s.last_seen,
                        "mention_count": s.mention_count,
                        "session_ids": sorted(s.session_ids),
                    }
                    for s in (self._nodes[i] for i in sorted(self._nodes))
                ],
                "edges": [
                    {
                        "src": e.src,
                        "dst": e.dst,
                        "kind": e.kind.value,
                        "created_at": e.created_at,
                        "last_seen": e.last_seen,
                        "confidence": e.confidence,
                    }
                    for _, e in sorted(
                        self._edges.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value)
                    )
                ],
            }

    @staticmethod
    def _freeze_node(state: _NodeState) -> ConceptNode:
        return ConceptNode(
            id=state.id,
            label=state.label,
            canonical_key=state.key,
            kind=state.kind,
            embedding=state.embedding,
            created_at=state.created_at,
            last_seen=state.last_seen,
            mention_count=state.mention_count,
            session_ids=frozenset(state.session_ids),
        )

    @staticmethod
    def _freeze_edge(state: _EdgeState) -> RelationEdge:
        return RelationEdge(
            id=state.id,
            src=state.src,
            dst=state.dst,
            kind=state.kind,
            created_at=state.created_at,
            last_seen=state.last_seen,
            confidence=state.confidence,
        )
