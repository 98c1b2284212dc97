"""Map generated surface strings back to token indices and classify generation errors.

The predicate is anchored first at the earliest occurrence of its words. Every
other element takes the occurrence whose midpoint is nearest the predicate's
midpoint (earliest on ties). Without a predicate, the subject serves as the
anchor; without either, elements take their earliest occurrence. Words that do
not occur in the sentence are dropped and recorded.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import ROLE_FIELDS, ROLES, LabelScheme, Quintuple, Sentence, Span
from .template import FORMAT_ERROR_KINDS, ParseOutcome, RawQuintuple


class UnmappableTuple(ValueError):
    """No element of a generated tuple could be located in the sentence."""

    def __init__(self, raw: RawQuintuple, dropped_words: Sequence[tuple[str, str]]):
        super().__init__("no element of the tuple occurs in the sentence")
        self.raw = raw
        self.dropped_words = tuple(dropped_words)


@dataclass(frozen=True)
class MappedQuintuple:
    spans: dict
    label: Optional[str]
    dropped_words: tuple[tuple[str, str], ...] = ()

    def span(self, role: str) -> Optional[Span]:
        return self.spans.get(role)

    @property
    def empty(self) -> bool:
        return all(self.spans.get(r) is None for r in ROLES)


def _midpoint(span: Span) -> float:
    return (span[0] + span[-1]) / 2


def _pick(candidates: list[Span], anchor: Optional[float]) -> Span:
    if anchor is None:
        return candidates[0]
    # min() keeps the first of equal keys, i.e. the earliest occurrence
    return min(candidates, key=lambda s: abs(_midpoint(s) - anchor))


def _resolve(phrase: str, words: Sequence[str], anchor: Optional[float], role: str,
             dropped: list[tuple[str, str]]) -> Optional[Span]:
    parts = phrase.split()
    n = len(parts)
    contiguous = [tuple(range(i, i + n)) for i in range(len(words) - n + 1) if list(words[i:i + n]) == parts]
    if contiguous:
        return _pick(contiguous, anchor)
    chosen = set()
    for w in parts:
        occ = [(i,) for i, t in enumerate(words) if t == w]
        if not occ:
            dropped.append((role, w))
            continue
        chosen.add(_pick(occ, anchor)[0])
    return tuple(sorted(chosen)) or None


def map_to_spans(raw: RawQuintuple, sentence: Sentence) -> MappedQuintuple:
    words = sentence.words
    dropped: list[tuple[str, str]] = []
    spans: dict[str, Optional[Span]] = dict.fromkeys(ROLES)

    anchor = None
    done = set()
    for role in ("P", "S"):
        text = raw.get(role)
        if text:
            spans[role] = _resolve(text, words, None, role, dropped)
            done.add(role)
            if spans[role] is not None:
                anchor = _midpoint(spans[role])
                break
    for role in ROLES:
        text = raw.get(role)
        if text and role not in done:
            spans[role] = _resolve(text, words, anchor, role, dropped)

    given = any(raw.get(r) for r in ROLES)
    if given and all(s is None for s in spans.values()):
        raise UnmappableTuple(raw, dropped)
    return MappedQuintuple(spans, raw.label, tuple(dropped))


REJECTION_REASONS = ("missing_label", "unknown_label", "empty_tuple")


def validate_tuple(mapped: MappedQuintuple, scheme: LabelScheme) -> tuple[Optional[Quintuple], Optional[str]]:
    """Return ``(quintuple, None)`` if acceptable, else ``(None, reason)``."""
    if not mapped.label:
        return None, "missing_label"
    if mapped.label not in scheme:
        return None, "unknown_label"
    if mapped.empty:
        return None, "empty_tuple"
    return Quintuple(label=mapped.label, **{ROLE_FIELDS[r]: mapped.span(r) for r in ROLES}), None


EXTRA_COUNTS = ("hallucination", "empty_after_validation", "unmappable", "rejected", "missing_element")
ERROR_KINDS = FORMAT_ERROR_KINDS + EXTRA_COUNTS


@dataclass
class ErrorReport:
    """Counts of format diagnostics and content errors for one or more generations.

    ``missing_element`` is only filled when gold tuples are supplied: the
    number of elements present in the gold tuple but absent from the
    prediction paired with it.
    """

    counts: Counter = field(default_factory=Counter)
    sentences: int = 0
    sentences_with: Counter = field(default_factory=Counter)

    def __post_init__(self):
        for k in ERROR_KINDS:
            self.counts.setdefault(k, 0)
            self.sentences_with.setdefault(k, 0)

    @property
    def diagnostics(self) -> int:
        return sum(self.counts[k] for k in FORMAT_ERROR_KINDS)

    def merge(self, other: "ErrorReport") -> None:
        self.counts.update(other.counts)
        self.sentences += other.sentences
        self.sentences_with.update(other.sentences_with)

    def to_json(self) -> dict:
        return {
            "counts": {k: self.counts[k] for k in ERROR_KINDS},
            "sentences": self.sentences,
            "sentences_with": {k: self.sentences_with[k] for k in ERROR_KINDS},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ErrorReport":
        rep = cls(Counter(obj.get("counts", {})), int(obj.get("sentences", 0)),
                  Counter(obj.get("sentences_with", {})))
        unknown = set(rep.counts) - set(ERROR_KINDS)
        if unknown:
            raise ValueError(f"unknown error kinds {sorted(unknown)}")
        return rep

    def table(self) -> str:
        w = max(len(k) for k in ERROR_KINDS)
        lines = [f"{'kind':<{w}}  {'count':>7}  {'sentences':>9}"]
        for k in ERROR_KINDS:
            lines.append(f"{k:<{w}}  {self.counts[k]:>7}  {self.sentences_with[k]:>9}")
        lines.append(f"{'(total sentences)':<{w}}  {'':>7}  {self.sentences:>9}")
        return "\n".join(lines)


def _missing_elements(mapped: Sequence[MappedQuintuple], gold: Sequence[Quintuple]) -> int:
    if not mapped or not gold:
        return 0

    def agreement(m: MappedQuintuple, g: Quintuple) -> int:
        return sum(m.span(r) == g.span(r) for r in ROLES) + (m.label == g.label)

    scores = np.array([[agreement(m, g) for g in gold] for m in mapped], dtype=float)
    rows, cols = linear_sum_assignment(scores, maximize=True)
    missing = 0
    for i, j in zip(rows, cols):
        missing += sum(1 for r in ROLES if gold[j].span(r) is not None and mapped[i].span(r) is None)
    return missing


def classify_errors(parse: ParseOutcome, mapped: Sequence[MappedQuintuple], sentence: Sentence,
                    unmappable: Iterable[UnmappableTuple] = (), rejected: int = 0,
                    gold: Optional[Sequence[Quintuple]] = None) -> ErrorReport:
    unmappable = list(unmappable)
    counts: Counter = Counter(d.kind for d in parse.diagnostics)
    counts["hallucination"] = (sum(1 for m in mapped if m.dropped_words)
                               + sum(1 for u in unmappable if u.dropped_words))
    counts["empty_after_validation"] = sum(1 for m in mapped if m.empty)
    counts["unmappable"] = len(unmappable)
    counts["rejected"] = rejected
    if gold is not None:
        counts["missing_element"] = _missing_elements(mapped, gold)
    report = ErrorReport(counts, 1)
    for k in ERROR_KINDS:
        if report.counts[k]:
            report.sentences_with[k] = 1
    return report
