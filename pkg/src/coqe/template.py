"""Prompt rendering, marker-serialized targets, and a best-effort target parser.

Target grammar, for a view whose marker sequence is ``m1 .. mk``::

    output   := "none" | tuple (" ; " tuple)*
    tuple    := m1 payload m2 payload ... mk payload
    payload  := "[UNK]" | word (" " word)*

Full extraction views use the four element markers in the view's order and
always end with ``[L]``; single-task views carry a single marker.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import permutations
from typing import Optional, Sequence, Union

from .corpus import ROLE_FIELDS, ROLES, Quintuple, Sentence, element_surface

ALL_ROLES = ROLES + ("L",)
MARKERS = {r: f"[{r}]" for r in ALL_ROLES}
MARKER_ROLE = {m: r for r, m in MARKERS.items()}
SEPARATOR = ";"
MISSING = "[UNK]"
NONE_WORD = "none"


@dataclass(frozen=True)
class TargetGrammar:
    markers: tuple[str, ...] = tuple(MARKERS.values())
    separator: str = SEPARATOR
    missing: str = MISSING
    none_word: str = NONE_WORD

    def __post_init__(self):
        specials = list(self.markers) + [self.separator, self.missing, self.none_word]
        if len(set(specials)) != len(specials):
            raise ValueError("grammar tokens must be mutually distinct")

    @property
    def specials(self) -> tuple[str, ...]:
        return (self.separator, self.missing, self.none_word)


GRAMMAR = TargetGrammar()


@dataclass(frozen=True)
class ElementOrder:
    """Serialization order of the four span roles; the label always follows."""

    roles: tuple[str, ...]

    def __post_init__(self):
        if sorted(self.roles) != sorted(ROLES):
            raise ValueError(f"an element order must permute {ROLES}, got {self.roles}")

    @classmethod
    def parse(cls, text: str) -> "ElementOrder":
        return cls(tuple(text.strip().upper().replace(",", "")))

    @property
    def markers(self) -> tuple[str, ...]:
        return self.roles + ("L",)

    @property
    def tag(self) -> str:
        return "".join(self.roles)

    def __str__(self) -> str:
        return self.tag


@dataclass(frozen=True)
class SingleTask:
    """Extract one role only."""

    role: str

    def __post_init__(self):
        if self.role not in ALL_ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    @property
    def markers(self) -> tuple[str, ...]:
        return (self.role,)

    @property
    def tag(self) -> str:
        return f"single:{self.role}"

    def __str__(self) -> str:
        return self.tag


View = Union[ElementOrder, SingleTask]

CANONICAL = ElementOrder(ROLES)
SINGLE_TASKS = tuple(SingleTask(r) for r in ALL_ROLES)


def all_orders() -> list[ElementOrder]:
    return [ElementOrder(p) for p in sorted(permutations(ROLES))]


def view_from_tag(tag: str) -> View:
    if tag.startswith("single:"):
        return SingleTask(tag.split(":", 1)[1])
    return ElementOrder.parse(tag)


# --- prompts -----------------------------------------------------------------

@dataclass(frozen=True)
class PromptStyle:
    placement: str = "prefix"
    instruction: str = "extract"
    role_names: dict = field(default_factory=lambda: dict(ENGLISH_ROLE_NAMES))
    joiner: str = " : "

    def __post_init__(self):
        if self.placement not in ("prefix", "suffix"):
            raise ValueError(f"placement must be 'prefix' or 'suffix', got {self.placement!r}")


ENGLISH_ROLE_NAMES = {"S": "subject", "O": "object", "A": "aspect", "P": "predicate", "L": "label"}
VIETNAMESE_ROLE_NAMES = {"S": "chủ thể", "O": "đối tượng", "A": "khía cạnh", "P": "vị từ", "L": "nhãn"}


def style_for(placement: str = "prefix", language: str = "en") -> PromptStyle:
    if language == "vi":
        return PromptStyle(placement, "trích xuất", dict(VIETNAMESE_ROLE_NAMES))
    return PromptStyle(placement)


def instruction_text(view: View, style: PromptStyle) -> str:
    return " ".join([style.instruction] + [style.role_names[r] for r in view.markers])


def render_prompt(sentence: Sentence | str, view: View, style: PromptStyle = PromptStyle()) -> str:
    raw = sentence if isinstance(sentence, str) else sentence.raw
    instr = instruction_text(view, style)
    if style.placement == "prefix":
        return instr + style.joiner + raw
    return raw + style.joiner + instr


# --- targets -------------------------------------------------------------------

@dataclass(frozen=True)
class RawQuintuple:
    """Surface strings recovered from generated text; no token indices yet."""

    subject: Optional[str] = None
    object: Optional[str] = None
    aspect: Optional[str] = None
    predicate: Optional[str] = None
    label: Optional[str] = None

    def get(self, role: str) -> Optional[str]:
        return self.label if role == "L" else getattr(self, ROLE_FIELDS[role])

    def only(self, roles: Sequence[str]) -> "RawQuintuple":
        kept = {("label" if r == "L" else ROLE_FIELDS[r]): self.get(r) for r in roles}
        return RawQuintuple(**kept)


def to_raw(q: Quintuple, sentence: Sentence) -> RawQuintuple:
    surf = {ROLE_FIELDS[r]: (element_surface(sentence, s) if s is not None else None)
            for r, s in q.spans().items()}
    return RawQuintuple(label=q.label, **surf)


def render_raw(tuples: Sequence[RawQuintuple], view: View, grammar: TargetGrammar = GRAMMAR) -> str:
    if not tuples:
        return grammar.none_word
    parts = []
    for t in tuples:
        bits = []
        for role in view.markers:
            value = t.get(role)
            bits.append(MARKERS[role])
            bits.append(value if value else grammar.missing)
        parts.append(" ".join(bits))
    return f" {grammar.separator} ".join(parts)


def render_target(quintuples: Sequence[Quintuple], sentence: Sentence, view: View,
                  grammar: TargetGrammar = GRAMMAR) -> str:
    return render_raw([to_raw(q, sentence) for q in quintuples], view, grammar)


# --- parsing -------------------------------------------------------------------

FORMAT_ERROR_KINDS = (
    "missing_marker",
    "wrong_marker_order",
    "duplicate_marker",
    "trailing_garbage",
    "empty_output",
    "nonsense",
)


@dataclass(frozen=True)
class FormatError:
    kind: str
    position: int

    def __post_init__(self):
        if self.kind not in FORMAT_ERROR_KINDS:
            raise ValueError(f"unknown format error kind {self.kind!r}")


@dataclass(frozen=True)
class ParseOutcome:
    tuples: tuple[RawQuintuple, ...]
    diagnostics: tuple[FormatError, ...]

    @property
    def clean(self) -> bool:
        return not self.diagnostics


_MARKER_PATTERN = "|".join(re.escape(m) for m in list(MARKERS.values()) + [MISSING])
_TOKEN_RE = re.compile(rf"{_MARKER_PATTERN}|(?:(?!{_MARKER_PATTERN})\S)+")


def _lex(text: str) -> list[tuple[str, int]]:
    return [(m.group(), m.start()) for m in _TOKEN_RE.finditer(text)]


def _segments(toks: list[tuple[str, int]], view: View, grammar: TargetGrammar):
    """Split on separators that sit at a tuple boundary.

    A separator token also appears inside payloads when the sentence itself
    contains one, so it only splits when followed by the view's first marker
    or, once the view's last marker was seen, by any marker. A label payload
    never contains a separator, so after [L] every separator splits.
    """
    first = MARKERS[view.markers[0]]
    last = MARKERS[view.markers[-1]]
    label_last = view.markers[-1] == "L"
    segments, current, seen_last = [], [], False
    for i, (tok, pos) in enumerate(toks):
        if tok == grammar.separator:
            nxt = toks[i + 1][0] if i + 1 < len(toks) else None
            boundary = (
                nxt == first
                or (seen_last and (label_last or nxt in MARKER_ROLE))
            )
            if boundary:
                segments.append((current, pos))
                current, seen_last = [], False
                continue
        if tok == last:
            seen_last = True
        current.append((tok, pos))
    segments.append((current, toks[-1][1] + len(toks[-1][0]) if toks else 0))
    return segments


def _parse_segment(seg: list[tuple[str, int]], end: int, view: View,
                   grammar: TargetGrammar, diags: list[FormatError]) -> Optional[RawQuintuple]:
    if not seg:
        diags.append(FormatError("trailing_garbage", end))
        return None
    starts = [k for k, (tok, _) in enumerate(seg) if tok in MARKER_ROLE]
    if not starts:
        diags.append(FormatError("trailing_garbage", seg[0][1]))
        return None
    if starts[0] > 0:
        diags.append(FormatError("trailing_garbage", seg[0][1]))

    values: dict[str, Optional[str]] = {}
    ranked: list[tuple[int, int]] = []
    for n, k in enumerate(starts):
        marker, pos = seg[k]
        role = MARKER_ROLE[marker]
        stop = starts[n + 1] if n + 1 < len(starts) else len(seg)
        payload = [tok for tok, _ in seg[k + 1:stop]]
        if role in values:
            diags.append(FormatError("duplicate_marker", pos))
            continue
        if role not in view.markers:
            diags.append(FormatError("wrong_marker_order", pos))
        else:
            ranked.append((view.markers.index(role), pos))
        if not payload:
            diags.append(FormatError("missing_marker", pos))
            values[role] = None
        elif payload == [grammar.missing]:
            values[role] = None
        else:
            values[role] = " ".join(payload)

    for (a, _), (b, pos) in zip(ranked, ranked[1:]):
        if b < a:
            diags.append(FormatError("wrong_marker_order", pos))
            break
    for role in view.markers:
        if role not in values:
            diags.append(FormatError("missing_marker", end))

    kwargs = {("label" if r == "L" else ROLE_FIELDS[r]): v for r, v in values.items()}
    return RawQuintuple(**kwargs)


def parse_generated(text: str, view: View, grammar: TargetGrammar = GRAMMAR) -> ParseOutcome:
    """Parse generated text into raw tuples, never raising.

    Every deviation from the grammar becomes a FormatError; whatever roles can
    be identified are still returned.
    """
    stripped = text.strip()
    if not stripped:
        return ParseOutcome((), (FormatError("empty_output", 0),))
    if stripped == grammar.none_word:
        return ParseOutcome((), ())
    toks = _lex(text)
    if not any(tok in MARKER_ROLE for tok, _ in toks):
        return ParseOutcome((), (FormatError("nonsense", toks[0][1]),))

    diags: list[FormatError] = []
    tuples = []
    for seg, end in _segments(toks, view, grammar):
        raw = _parse_segment(seg, end, view, grammar, diags)
        if raw is not None:
            tuples.append(raw)
    return ParseOutcome(tuple(tuples), tuple(diags))
