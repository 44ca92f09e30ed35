"""Text-to-vector providers.

Two providers share one small interface: a fully deterministic hashing
embedder (hermetic, hand-checkable, used by default and in every test) and a
remote HTTP provider for real embedding services. All vectors leaving this
module are unit L2-normalized, except the all-zero vector produced for text
with no tokens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import httpx
import numpy as np

from .textutil import tokenize

DEFAULT_DIMENSION = 64

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


class EmbeddingError(Exception):
    """Base class for embedding provider failures."""


class EmbeddingTransportError(EmbeddingError):
    """Network-level failure talking to a remote provider; retryable."""


class EmbeddingStatusError(EmbeddingError):
    """Remote provider answered with a non-2xx status."""


class EmbeddingDimensionError(EmbeddingError):
    """Remote provider returned a vector of the wrong dimension; config bug."""


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


def unit_normalize(values: np.ndarray) -> np.ndarray:
    """L2-normalize, leaving an all-zero vector untouched."""
    vec = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        out = vec.copy()
    else:
        out = vec / norm
    out.flags.writeable = False
    return out


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector is all-zero."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


class DeterministicEmbedder:
    """Hash-based embedder: identical text always yields an identical vector.

    For each lowercased alphanumeric word the word itself and all of its
    character trigrams are hashed with 64-bit FNV-1a; each hash adds +1 or -1
    (sign from the hash's top bit) at index ``hash mod dimension``, and the
    accumulator is L2-normalized. Not semantically strong: similarity comes
    from lexical overlap only.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        acc = np.zeros(self.dimension, dtype=np.float64)
        count = 0
        for word in tokenize(text):
            for token in self._emit_tokens(word):
                h = fnv1a_64(token.encode("utf-8"))
                sign = 1.0 if (h >> 63) == 0 else -1.0
                acc[h % self.dimension] += sign
                count += 1
        if count == 0:
            acc.flags.writeable = False
            return acc
        return unit_normalize(acc)

    @staticmethod
    def _emit_tokens(word: str):
        yield word
        for i in range(len(word) - 2):
            yield word[i : i + 3]


@dataclass
class RemoteEmbedder:
    """HTTP embedding provider: POST {"input": text} -> {"embedding": [...]}.

    Responses are re-normalized to unit L2 norm before use. Stateless; safe
    for concurrent calls.
    """

    endpoint: str
    dimension: int
    timeout: float = 10.0
    transport: httpx.BaseTransport | None = None

    def embed(self, text: str) -> np.ndarray:
        try:
            with httpx.Client(transport=self.transport, timeout=self.timeout) as client:
                response = client.post(self.endpoint, json={"input": text})
        except httpx.HTTPError as exc:
            raise EmbeddingTransportError(f"embedding request failed: {exc}") from exc
        if not (200 <= response.status_code < 300):
            raise EmbeddingStatusError(
                f"embedding endpoint returned {response.status_code}"
            )
        try:
            values = response.json()["embedding"]
        except (KeyError, json.JSONDecodeError) as exc:
            raise EmbeddingStatusError(f"malformed embedding response: {exc}") from exc
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (self.dimension,):
            raise EmbeddingDimensionError(
                f"expected dimension {self.dimension}, got {vec.shape}"
            )
        return unit_normalize(vec)
