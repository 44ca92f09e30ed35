"""Document ingestion: plain text in, tagged embedded chunks out.

Character-window chunking (deterministic, language-agnostic) feeds the
embedder, and each chunk is tagged with the concept keys the fallback
extraction rule finds in it, so graph-guided vector queries can filter on
them. Ingest is atomic per document: every chunk is embedded before the
index is touched.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .events import EventLog
from .extraction import fallback_extract
from .textutil import canonical_key
from .vectors import VectorIndex


@dataclass(frozen=True)
class IngestReport:
    doc_name: str
    chunk_count: int
    concept_keys_attached: frozenset[str]
    elapsed_ms: int


def chunk_text(text: str, size: int = 512, overlap: int = 64) -> list[str]:
    """Split text into windows of `size` chars advancing by size - overlap.

    The final window may be short; empty text yields no chunks. Operates on
    code points, so multi-byte characters are never split.
    """
    if size <= overlap or overlap < 0:
        raise ValueError("require size > overlap >= 0")
    if not text:
        return []
    chunks = []
    start = 0
    while True:
        chunks.append(text[start : start + size])
        if start + size >= len(text):
            break
        start += size - overlap
    return chunks


def chunk_concept_keys(chunk: str) -> frozenset[str]:
    """Concept keys for one chunk, via the shared fallback extraction rule."""
    return frozenset(canonical_key(label) for label, _ in fallback_extract(chunk).nodes)


def ingest_document(
    name: str,
    text: str,
    ts: int,
    embedder,
    index: VectorIndex,
    log: EventLog | None = None,
    size: int = 512,
    overlap: int = 64,
) -> IngestReport:
    """Chunk, embed, tag, and store a document; replaces any prior version.

    Embedding errors abort before the index is modified, so the index always
    holds either the old version of the document or the new one.
    """
    if not name:
        raise ValueError("document name must be non-empty")
    if not text:
        raise ValueError("empty document")

    started = time.perf_counter()
    pieces = chunk_text(text, size=size, overlap=overlap)
    prepared = []
    for ordinal, piece in enumerate(pieces):
        embedding = embedder.embed(piece)  # may raise; nothing stored yet
        prepared.append((ordinal, piece, embedding, chunk_concept_keys(piece)))

    removed = index.remove_doc(name)
    if log is not None and removed:
        log.append("doc_removed", ts, {"doc_name": name, "removed": removed})
    attached: set[str] = set()
    for ordinal, piece, embedding, keys in prepared:
        index.add_chunk(
            doc_name=name,
            ordinal=ordinal,
            text=piece,
            embedding=embedding,
            concept_keys=keys,
            created_at=ts,
        )
        attached |= keys
        if log is not None:
            log.append(
                "chunk_added",
                ts,
                {
                    "doc_name": name,
                    "ordinal": ordinal,
                    "text": piece,
                    "embedding": [float(x) for x in embedding],
                    "concept_keys": sorted(keys),
                    "created_at": ts,
                },
            )

    elapsed_ms = max(0, int((time.perf_counter() - started) * 1000))
    return IngestReport(
        doc_name=name,
        chunk_count=len(pieces),
        concept_keys_attached=frozenset(attached),
        elapsed_ms=elapsed_ms,
    )
