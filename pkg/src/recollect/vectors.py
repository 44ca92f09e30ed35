"""Exact cosine k-nearest-neighbor index over document chunks.

A flat scan, by contract: every query is an exact cosine ranking over all
stored chunks (optionally restricted to chunks sharing a concept key with the
query's graph context). Any approximate backend swapped in later must pass
the same oracle suite with perfect recall on these fixture sizes.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .embedding import cosine


class DimensionMismatchError(ValueError):
    """Chunk or query vector does not match the index dimension."""


@dataclass(frozen=True)
class Chunk:
    id: int
    doc_name: str
    ordinal: int
    text: str
    embedding: np.ndarray
    concept_keys: frozenset[str]
    created_at: int


@dataclass(frozen=True)
class SearchHit:
    chunk_id: int
    cosine: float


class VectorIndex:
    """In-memory chunk store with exact top-k cosine queries.

    Writes are serialized; queries take a consistent snapshot under the same
    lock, so a query never observes a half-applied write. Chunk ids grow
    monotonically and are never reused, including across replacements.
    """

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self._lock = threading.RLock()
        self._chunks: dict[int, Chunk] = {}
        self._by_position: dict[tuple[str, int], int] = {}
        self._next_id = 1

    def add_chunk(
        self,
        doc_name: str,
        ordinal: int,
        text: str,
        embedding: np.ndarray,
        concept_keys: set[str] | frozenset[str],
        created_at: int,
    ) -> int:
        """Store a chunk; a duplicate (doc_name, ordinal) replaces the old one."""
        vec = np.asarray(embedding, dtype=np.float64)
        if vec.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"expected dimension {self.dimension}, got {vec.shape}"
            )
        vec = vec.copy()
        vec.flags.writeable = False
        with self._lock:
            prior = self._by_position.get((doc_name, ordinal))
            if prior is not None:
                del self._chunks[prior]
            chunk_id = self._next_id
            self._next_id += 1
            self._chunks[chunk_id] = Chunk(
                id=chunk_id,
                doc_name=doc_name,
                ordinal=ordinal,
                text=text,
                embedding=vec,
                concept_keys=frozenset(concept_keys),
                created_at=created_at,
            )
            self._by_position[(doc_name, ordinal)] = chunk_id
            return chunk_id

    def knn(
        self,
        query_embedding: np.ndarray,
        k: int,
        concept_filter: set[str] | frozenset[str] | None = None,
    ) -> list[SearchHit]:
        """Exact top-k by cosine, descending, ties by ascending chunk id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        query = np.asarray(query_embedding, dtype=np.float64)
        if query.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"expected dimension {self.dimension}, got {query.shape}"
            )
        with self._lock:
            hits = [
                SearchHit(chunk.id, cosine(query, chunk.embedding))
                for chunk in self._chunks.values()
                if concept_filter is None or chunk.concept_keys & concept_filter
            ]
        hits.sort(key=lambda h: (-h.cosine, h.chunk_id))
        return hits[:k]

    def remove_doc(self, doc_name: str) -> int:
        """Remove every chunk of a document; returns how many were removed."""
        with self._lock:
            doomed = [cid for cid, c in self._chunks.items() if c.doc_name == doc_name]
            for cid in doomed:
                chunk = self._chunks.pop(cid)
                del self._by_position[(chunk.doc_name, chunk.ordinal)]
            return len(doomed)

    def get_chunk(self, chunk_id: int) -> Chunk:
        with self._lock:
            chunk = self._chunks.get(chunk_id)
            if chunk is None:
                raise KeyError(f"unknown chunk id {chunk_id}")
            return chunk

    def doc_chunk_count(self, doc_name: str) -> int:
        with self._lock:
            return sum(1 for c in self._chunks.values() if c.doc_name == doc_name)

    def __len__(self) -> int:
        with self._lock:
            return len(self._chunks)

    def chunks(self) -> list[Chunk]:
        with self._lock:
            return [self._chunks[cid] for cid in sorted(self._chunks)]

    def snapshot(self) -> dict:
        """Canonical JSON-able state, chunks sorted by id."""
        with self._lock:
            return {
                "dimension": self.dimension,
                "chunks": [
                    {
                        "id": c.id,
                        "doc_name": c.doc_name,
                        "ordinal": c.ordinal,
                        "text": c.text,
                        "embedding": [float(x) for x in c.embedding],
                        "concept_keys": sorted(c.concept_keys),
                        "created_at": c.created_at,
                    }
                    for c in (self._chunks[cid] for cid in sorted(self._chunks))
                ],
            }
