"""Append-only event log, deterministic replay, and state hashing.

Every engine mutation is appended as an event, so any state can be rebuilt
by folding the log; answer/reflection/error events ride along for audit but
are skipped during replay. Logs are JSONL on disk (one event per line), with
an optional footer line carrying the state digest for tamper checks.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import EngineConfig
from .graph import GraphStore
from .vectors import VectorIndex

EVENT_KINDS = frozenset(
    {
        "turn_recorded",
        "node_upserted",
        "edge_added",
        "chunk_added",
        "doc_removed",
        "answer_generated",
        "reflection_step",
        "fallback_extract",
        "llm_error",
    }
)

MUTATION_KINDS = frozenset({"node_upserted", "edge_added", "chunk_added", "doc_removed"})


class CorruptLogError(Exception):
    def __init__(self, message: str, seq: int | None = None):
        super().__init__(message)
        self.seq = seq


@dataclass(frozen=True)
class Event:
    seq: int
    ts: int
    kind: str
    payload: dict


def canonical_json(value) -> str:
    """Canonical serialization: sorted keys, no insignificant whitespace."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class EventLog:
    """Strictly ordered event sink; optionally mirrored to a JSONL file.

    Single writer, any number of readers; file appends are flushed and
    fsynced before returning so an acknowledged event is durable.
    """

    def __init__(self, path: str | Path | None = None):
        self._lock = threading.Lock()
        self._events: list[Event] = []
        self._next_seq = 1
        self._path = Path(path) if path else None
        self._fh = open(self._path, "a", encoding="utf-8") if self._path else None

    def append(self, kind: str, ts: int, payload: dict) -> int:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        with self._lock:
            event = Event(seq=self._next_seq, ts=ts, kind=kind, payload=payload)
            self._next_seq += 1
            self._events.append(event)
            if self._fh is not None:
                line = canonical_json(
                    {"seq": event.seq, "ts": event.ts, "kind": event.kind, "payload": event.payload}
                )
                self._fh.write(line + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
            return event.seq

    def events(self, since_seq: int = 0) -> list[Event]:
        with self._lock:
            return [e for e in self._events if e.seq > since_seq]

    @property
    def last_seq(self) -> int:
        with self._lock:
            return self._next_seq - 1

    def write_footer(self, state_hash: str) -> None:
        """Append the closing digest line used by replay verification."""
        with self._lock:
            if self._fh is not None:
                self._fh.write(canonical_json({"footer": {"state_hash": state_hash}}) + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


def read_log(path: str | Path) -> tuple[list[Event], str | None]:
    """Read a JSONL log; returns (events, footer state hash or None)."""
    events: list[Event] = []
    footer_hash: str | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptLogError(f"line {line_no}: unreadable log line: {exc}") from exc
            if "footer" in raw:
                footer_hash = raw["footer"].get("state_hash")
                continue
            try:
                events.append(
                    Event(seq=int(raw["seq"]), ts=int(raw["ts"]), kind=raw["kind"], payload=raw["payload"])
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptLogError(f"line {line_no}: malformed event: {exc}") from exc
    return events, footer_hash


def replay(events: list[Event], config: EngineConfig | None = None) -> tuple[GraphStore, VectorIndex]:
    """Rebuild graph and vector state by folding mutation events in order.

    The log must be gapless from seq 1. Non-mutation kinds are validated and
    skipped, except turn_recorded, which re-applies the auto-prune boundary
    when pruning is configured (prune itself is deterministic, so replay
    reproduces it without dedicated events).
    """
    config = config or EngineConfig()
    store = GraphStore(
        weights=config.weights,
        tau_ms=config.tau_ms,
        merge_threshold=config.merge_threshold,
        proximity_hop_cap=config.proximity_hop_cap,
    )
    index = VectorIndex(dimension=config.embedder.dimension)

    expected_seq = 1
    for event in events:
        if event.seq != expected_seq:
            raise CorruptLogError(
                f"sequence gap: expected {expected_seq}, found {event.seq}", seq=event.seq
            )
        expected_seq += 1
        if event.kind not in EVENT_KINDS:
            raise CorruptLogError(f"unknown event kind {event.kind!r} at seq {event.seq}", seq=event.seq)

        payload = event.payload
        try:
            if event.kind == "node_upserted":
                store.upsert_node(
                    label=payload["label"],
                    kind=payload["kind"],
                    embedding=np.asarray(payload["embedding"], dtype=np.float64),
                    ts=payload["ts"],
                    session_id=payload["session_id"],
                )
            elif event.kind == "edge_added":
                store.add_edge(
                    src=payload["src"],
                    dst=payload["dst"],
                    kind=payload["kind"],
                    ts=payload["ts"],
                    confidence=payload["confidence"],
                )
            elif event.kind == "chunk_added":
                index.add_chunk(
                    doc_name=payload["doc_name"],
                    ordinal=payload["ordinal"],
                    text=payload["text"],
                    embedding=np.asarray(payload["embedding"], dtype=np.float64),
                    concept_keys=set(payload["concept_keys"]),
                    created_at=payload["created_at"],
                )
            elif event.kind == "doc_removed":
                index.remove_doc(payload["doc_name"])
            elif event.kind == "turn_recorded":
                if config.prune.max_nodes is not None:
                    store.prune(config.prune.max_nodes)
        except (KeyError, TypeError) as exc:
            raise CorruptLogError(f"bad payload at seq {event.seq}: {exc}", seq=event.seq) from exc
    return store, index


def state_hash(store: GraphStore, index: VectorIndex) -> str:
    """SHA-256 over the canonical JSON snapshot of both stores."""
    snapshot = {"graph": store.snapshot(), "vectors": index.snapshot()}
    return hashlib.sha256(canonical_json(snapshot).encode("utf-8")).hexdigest()


def verify_log(path: str | Path, config: EngineConfig | None = None) -> tuple[bool, str, str | None]:
    """Replay a log file and compare against its footer digest.

    Returns (ok, computed_hash, footer_hash); ok is False when the footer is
    missing or disagrees.
    """
    events, footer_hash = read_log(path)
    store, index = replay(events, config)
    computed = state_hash(store, index)
    return (footer_hash is not None and computed == footer_hash, computed, footer_hash)
