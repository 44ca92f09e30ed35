"""Shared text normalization helpers.

One tokenization/canonicalization idiom is used everywhere (node identity,
chunk tagging, metric n-grams) so the stores, the extractor, and the eval
metrics agree on what "the same text" means.
"""

from __future__ import annotations

import re

# Unicode alphanumeric runs, underscore excluded.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_WS_RE = re.compile(r"\s+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


def canonical_key(label: str) -> str:
    """Case-folded, whitespace-collapsed form of a label.

    Two labels with the same canonical key name the same concept.
    """
    return _WS_RE.sub(" ", label.casefold()).strip()
