"""Entity/relation extraction from turn text.

The primary path asks the extractor LLM for a JSON delta; when that output
is unusable the engine falls back to the deterministic rule implemented
here, so the pipeline works hermetically. One extraction rule is shared by
turn capture and document ingest (chunk concept tagging).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import EdgeKind, NodeKind
from .textutil import canonical_key

# sentence-initial words that are never entities on their own
STOPWORDS = frozenset(
    "i the a an in on at and or to of we you it my our this that can back".split()
)

FALLBACK_CONFIDENCE = 0.5

_SENTENCE_BREAKS = ".!?"


@dataclass
class GraphDelta:
    """Nodes and label-addressed edges to apply to the graph for one turn."""

    nodes: list[tuple[str, NodeKind]] = field(default_factory=list)
    edges: list[tuple[str, str, EdgeKind, float]] = field(default_factory=list)
    turn_label: str = ""


def _split_sentences(text: str) -> list[str]:
    sentences = []
    current: list[str] = []
    for ch in text:
        if ch in _SENTENCE_BREAKS:
            sentences.append("".join(current))
            current = []
        else:
            current.append(ch)
    sentences.append("".join(current))
    return sentences


def _strip_token(word: str) -> str:
    start, end = 0, len(word)
    while start < end and not word[start].isalnum():
        start += 1
    while end > start and not word[end - 1].isalnum():
        end -= 1
    return word[start:end]


def _sentence_entities(sentence: str) -> list[str]:
    words = [_strip_token(w) for w in sentence.split()]
    runs: list[tuple[int, list[str]]] = []
    current: tuple[int, list[str]] | None = None
    for i, word in enumerate(words):
        if word and word[0].isupper():
            if current is None:
                current = (i, [])
            current[1].append(word)
        elif current is not None:
            runs.append(current)
            current = None
    if current is not None:
        runs.append(current)

    entities = []
    for start, tokens in runs:
        if start == 0 and len(tokens) == 1 and tokens[0].lower() in STOPWORDS:
            continue
        entities.append(" ".join(tokens))
    return entities


def fallback_extract(text: str) -> GraphDelta:
    """Deterministic extraction: capitalized runs become Entity nodes.

    Within each sentence, a maximal run of tokens starting with an uppercase
    character forms one entity; a lone sentence-initial stopword ("The ...",
    "I ...") is ignored. Consecutive entities in a sentence are linked with
    RELATES_TO edges at a fixed confidence.
    """
    delta = GraphDelta(turn_label=text)
    seen_keys: set[str] = set()
    for sentence in _split_sentences(text):
        entities = _sentence_entities(sentence)
        for label in entities:
            key = canonical_key(label)
            if key not in seen_keys:
                seen_keys.add(key)
                delta.nodes.append((label, NodeKind.ENTITY))
        for src, dst in zip(entities, entities[1:]):
            delta.edges.append((src, dst, EdgeKind.RELATES_TO, FALLBACK_CONFIDENCE))
    return delta


def delta_from_extractor_payload(payload: dict, text: str) -> GraphDelta:
    """Convert the extractor LLM's JSON into a GraphDelta, defensively.

    Unknown node kinds degrade to Entity (the extractor may not mint Turn
    nodes), unknown relation kinds to RELATES_TO, and confidences are clamped
    to [0, 1]. Raises ValueError when the overall shape is unusable.
    """
    entities = payload.get("entities")
    if not isinstance(entities, list):
        raise ValueError("extractor payload missing 'entities' list")
    relations = payload.get("relations", [])
    if not isinstance(relations, list):
        raise ValueError("extractor payload 'relations' is not a list")

    delta = GraphDelta(turn_label=text)
    seen_keys: set[str] = set()
    for item in entities:
        if not isinstance(item, dict):
            continue
        label = str(item.get("label", "")).strip()
        if not label:
            continue
        try:
            kind = NodeKind.coerce(item.get("kind", NodeKind.ENTITY))
        except ValueError:
            kind = NodeKind.ENTITY
        if kind is NodeKind.TURN:
            kind = NodeKind.ENTITY
        key = canonical_key(label)
        if key not in seen_keys:
            seen_keys.add(key)
            delta.nodes.append((label, kind))

    for item in relations:
        if not isinstance(item, dict):
            continue
        src = str(item.get("src", "")).strip()
        dst = str(item.get("dst", "")).strip()
        if not src or not dst:
            continue
        try:
            kind = EdgeKind.coerce(item.get("kind", EdgeKind.RELATES_TO))
        except ValueError:
            kind = EdgeKind.RELATES_TO
        try:
            confidence = float(item.get("confidence", FALLBACK_CONFIDENCE))
        except (TypeError, ValueError):
            confidence = FALLBACK_CONFIDENCE
        confidence = min(1.0, max(0.0, confidence))
        delta.edges.append((src, dst, kind, confidence))
    return delta
