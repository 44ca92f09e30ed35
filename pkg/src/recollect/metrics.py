"""Answer-quality metrics: n-gram overlap, longest common subsequence, and
required-phrase accuracy.

Tokenization matches the rest of the system: lowercase, split on
non-alphanumeric runs. All scores are precision/recall/F1 triples in [0, 1].
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .textutil import tokenize


@dataclass(frozen=True)
class RougeScores:
    precision: float
    recall: float
    f1: float


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(reference: str, candidate: str, n: int) -> RougeScores:
    """Clipped n-gram overlap scores of candidate against reference."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ref_counts = _ngrams(tokenize(reference), n)
    cand_counts = _ngrams(tokenize(candidate), n)
    overlap = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    ref_total = sum(ref_counts.values())
    cand_total = sum(cand_counts.values())
    recall = overlap / ref_total if ref_total else 0.0
    precision = overlap / cand_total if cand_total else 0.0
    return RougeScores(precision=precision, recall=recall, f1=_f1(precision, recall))


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        current = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                current[j] = prev[j - 1] + 1
            else:
                current[j] = max(prev[j], current[j - 1])
        prev = current
    return prev[len(b)]


def rouge_l(reference: str, candidate: str) -> RougeScores:
    """Token-level longest-common-subsequence scores (balanced F1)."""
    ref_tokens = tokenize(reference)
    cand_tokens = tokenize(candidate)
    lcs = _lcs_length(ref_tokens, cand_tokens)
    recall = lcs / len(ref_tokens) if ref_tokens else 0.0
    precision = lcs / len(cand_tokens) if cand_tokens else 0.0
    return RougeScores(precision=precision, recall=recall, f1=_f1(precision, recall))


def answer_is_correct(answer: str, required_phrases: Sequence[str]) -> bool:
    """Correct iff every required phrase occurs case-insensitively."""
    haystack = answer.lower()
    return all(phrase.lower() in haystack for phrase in required_phrases)


def accuracy(answers: Sequence[str], required_phrases: Sequence[Sequence[str]]) -> float:
    """Fraction of answers containing all of their required phrases."""
    if len(answers) != len(required_phrases):
        raise ValueError("answers and required_phrases must be the same length")
    if not answers:
        raise ValueError("accuracy needs at least one scored answer")
    correct = sum(
        1 for answer, phrases in zip(answers, required_phrases) if answer_is_correct(answer, phrases)
    )
    return correct / len(answers)
