"""COQE data model, tokenization, corpus I/O and dataset statistics."""
from __future__ import annotations

import json
import re
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Optional, Sequence

ROLES = ("S", "O", "A", "P")
ROLE_FIELDS = {"S": "subject", "O": "object", "A": "aspect", "P": "predicate"}
SPLITS = ("train", "dev", "test", "unsplit")

# Tokens a pre-tokenized corpus may not contain; they collide with the target grammar.
RESERVED_TOKENS = frozenset({"[S]", "[O]", "[A]", "[P]", "[L]", "[UNK]"})


class CorpusError(ValueError):
    """Raised when a corpus record violates the file format or a data invariant."""

    def __init__(self, message: str, line: Optional[int] = None, record_id: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if record_id is not None:
            where.append(f"record {record_id!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.record_id = record_id


@dataclass(frozen=True)
class Token:
    text: str
    index: int
    char_start: int
    char_end: int


@dataclass(frozen=True)
class Sentence:
    id: str
    raw: str
    tokens: tuple[Token, ...]

    def __post_init__(self):
        prev_end = 0
        for i, tok in enumerate(self.tokens):
            if tok.index != i:
                raise ValueError(f"token indices must be consecutive, got {tok.index} at {i}")
            if not (prev_end <= tok.char_start < tok.char_end <= len(self.raw)):
                raise ValueError(f"token {i} has invalid char range {tok.char_start}:{tok.char_end}")
            if self.raw[tok.char_start:tok.char_end] != tok.text:
                raise ValueError(f"token {i} text {tok.text!r} does not match raw text")
            prev_end = tok.char_end
        if not self.tokens and self.raw.strip():
            raise ValueError("non-blank sentence has no tokens")

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class LabelScheme:
    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.labels:
            raise ValueError("label scheme must not be empty")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("label scheme has duplicate labels")

    def __contains__(self, label: object) -> bool:
        return label in self.labels


# gradable, superlative, equal, non-gradable
CAMERA = LabelScheme("camera", ("COM", "SUP", "EQL", "DIF"))
VCOM = LabelScheme("vcom", ("COM", "COM+", "COM-", "SUP", "SUP+", "SUP-", "EQL", "DIF"))
SCHEMES = {"camera": CAMERA, "vcom": VCOM}


def get_scheme(name: str) -> LabelScheme:
    try:
        return SCHEMES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown label scheme {name!r}; choose from {sorted(SCHEMES)}") from None


Span = tuple[int, ...]


def _check_span(span: Span, role: str) -> None:
    if not span:
        raise ValueError(f"{role} span is empty; use None for an absent element")
    if any(i < 0 for i in span):
        raise ValueError(f"{role} span has a negative index")
    if any(a >= b for a, b in zip(span, span[1:])):
        raise ValueError(f"{role} span must be strictly increasing")


@dataclass(frozen=True)
class Quintuple:
    """One comparison: four optional token-index spans and a label.

    Spans are tuples of token indices rather than ranges because element
    validation may remove interior words.
    """

    subject: Optional[Span]
    object: Optional[Span]
    aspect: Optional[Span]
    predicate: Optional[Span]
    label: str

    def __post_init__(self):
        present = 0
        for role in ROLES:
            span = self.span(role)
            if span is not None:
                _check_span(span, ROLE_FIELDS[role])
                present += 1
        if present == 0:
            raise ValueError("a quintuple needs at least one present element")
        if not self.label:
            raise ValueError("quintuple label is empty")

    def span(self, role: str) -> Optional[Span]:
        return getattr(self, ROLE_FIELDS[role])

    def spans(self) -> dict[str, Optional[Span]]:
        return {r: self.span(r) for r in ROLES}

    def max_index(self) -> int:
        return max(max(s) for s in self.spans().values() if s is not None)

    def to_json(self) -> dict:
        out = {ROLE_FIELDS[r]: (list(s) if s is not None else None) for r, s in self.spans().items()}
        out["label"] = self.label
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Quintuple":
        kwargs = {}
        for role in ROLES:
            name = ROLE_FIELDS[role]
            value = obj.get(name)
            if value is None:
                kwargs[name] = None
            elif isinstance(value, list) and all(isinstance(i, int) and not isinstance(i, bool) for i in value):
                kwargs[name] = tuple(value)
            else:
                raise ValueError(f"{name} must be a list of integers or null")
        label = obj.get("label")
        if not isinstance(label, str):
            raise ValueError("label must be a string")
        return cls(label=label, **kwargs)


@dataclass(frozen=True)
class LabeledSentence:
    sentence: Sentence
    quintuples: tuple[Quintuple, ...] = ()

    def __post_init__(self):
        n = len(self.sentence)
        for q in self.quintuples:
            if q.max_index() >= n:
                raise ValueError(f"span index {q.max_index()} out of range for {n}-token sentence")

    @property
    def id(self) -> str:
        return self.sentence.id

    @property
    def comparative(self) -> bool:
        return bool(self.quintuples)


@dataclass(frozen=True)
class Corpus:
    scheme: LabelScheme
    items: tuple[LabeledSentence, ...]
    split: str = "unsplit"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        seen = set()
        for item in self.items:
            if item.id in seen:
                raise ValueError(f"duplicate sentence id {item.id!r}")
            seen.add(item.id)
            for q in item.quintuples:
                if q.label not in self.scheme:
                    raise ValueError(f"label {q.label!r} not in scheme {self.scheme.name}")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[LabeledSentence]:
        return iter(self.items)

    def by_id(self) -> dict[str, LabeledSentence]:
        return {item.id: item for item in self.items}


# --- tokenization -----------------------------------------------------------

@dataclass(frozen=True)
class TokenizerConfig:
    """Whitespace split, then peel leading/trailing punctuation one char at a time."""

    split_punctuation: bool = True
    punctuation: str = string.punctuation + "‘’“”…«»"


DEFAULT_TOKENIZER = TokenizerConfig()


_BRACKETS = re.compile(r"([\[\]])")


def _is_punct(ch: str, config: TokenizerConfig) -> bool:
    return ch in config.punctuation or unicodedata.category(ch).startswith("P")


def _split_reserved(core: str, start: int) -> list[tuple[str, int, int]]:
    # brackets become standalone tokens so no token can contain a marker
    if not any(r in core for r in RESERVED_TOKENS):
        return [(core, start, start + len(core))]
    pieces = []
    for part in _BRACKETS.split(core):
        if part:
            pieces.append((part, start, start + len(part)))
            start += len(part)
    return pieces


def _split_chunk(chunk: str, start: int, config: TokenizerConfig) -> list[tuple[str, int, int]]:
    if not config.split_punctuation:
        return _split_reserved(chunk, start)
    lo, hi = 0, len(chunk)
    while lo < hi and _is_punct(chunk[lo], config):
        lo += 1
    if lo == hi:
        # all punctuation: every char is its own token
        return [(c, start + i, start + i + 1) for i, c in enumerate(chunk)]
    while hi > lo and _is_punct(chunk[hi - 1], config):
        hi -= 1
    pieces = [(chunk[i], start + i, start + i + 1) for i in range(lo)]
    pieces.extend(_split_reserved(chunk[lo:hi], start + lo))
    pieces.extend((chunk[i], start + i, start + i + 1) for i in range(hi, len(chunk)))
    return pieces


def tokenize(raw: str, config: TokenizerConfig = DEFAULT_TOKENIZER) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    for chunk in raw.split():
        start = raw.index(chunk, pos)
        pos = start + len(chunk)
        for text, s, e in _split_chunk(chunk, start, config):
            tokens.append(Token(text, len(tokens), s, e))
    return tokens


def align_tokens(raw: str, words: Sequence[str]) -> list[Token]:
    """Locate pre-tokenized words in ``raw``; raise ValueError if they do not align."""
    tokens = []
    pos = 0
    for i, word in enumerate(words):
        if not word or any(ch.isspace() for ch in word):
            raise ValueError(f"token {i} is empty or contains whitespace")
        while pos < len(raw) and raw[pos].isspace():
            pos += 1
        if not raw.startswith(word, pos):
            raise ValueError(f"token {i} ({word!r}) does not align with the text at offset {pos}")
        tokens.append(Token(word, i, pos, pos + len(word)))
        pos += len(word)
    if raw[pos:].strip():
        raise ValueError("text has trailing content not covered by tokens")
    return tokens


def make_sentence(id: str, raw: str, words: Optional[Sequence[str]] = None,
                  config: TokenizerConfig = DEFAULT_TOKENIZER) -> Sentence:
    tokens = align_tokens(raw, words) if words is not None else tokenize(raw, config)
    return Sentence(id, raw, tuple(tokens))


def element_surface(sentence: Sentence, span: Span) -> str:
    return " ".join(sentence.tokens[i].text for i in span)


# --- JSON Lines I/O ---------------------------------------------------------

def parse_record(obj: object, scheme: LabelScheme, config: TokenizerConfig = DEFAULT_TOKENIZER,
                 line: Optional[int] = None) -> LabeledSentence:
    if not isinstance(obj, dict):
        raise CorpusError("record must be a JSON object", line)
    rid = obj.get("id")
    if not isinstance(rid, str):
        raise CorpusError("missing or non-string 'id'", line)
    text = obj.get("text")
    if not isinstance(text, str):
        raise CorpusError("missing or non-string 'text'", line, rid)
    words = obj.get("tokens")
    if words is not None:
        if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
            raise CorpusError("'tokens' must be a list of strings", line, rid)
        bad = RESERVED_TOKENS.intersection(words)
        if bad:
            raise CorpusError(f"reserved marker token(s) in 'tokens': {sorted(bad)}", line, rid)
    try:
        sentence = make_sentence(rid, text, words, config)
    except ValueError as exc:
        raise CorpusError(str(exc), line, rid) from None

    raw_quints = obj.get("quintuples", [])
    if not isinstance(raw_quints, list):
        raise CorpusError("'quintuples' must be a list", line, rid)
    quints = []
    for k, rq in enumerate(raw_quints):
        if not isinstance(rq, dict):
            raise CorpusError(f"quintuple {k} must be an object", line, rid)
        try:
            q = Quintuple.from_json(rq)
        except ValueError as exc:
            raise CorpusError(f"quintuple {k}: {exc}", line, rid) from None
        if q.label not in scheme:
            raise CorpusError(f"quintuple {k}: unknown label {q.label!r} for scheme {scheme.name}", line, rid)
        if q.max_index() >= len(sentence):
            raise CorpusError(
                f"quintuple {k}: span index {q.max_index()} out of range "
                f"for {len(sentence)}-token sentence", line, rid)
        quints.append(q)
    return LabeledSentence(sentence, tuple(quints))


def iter_jsonl(source: IO) -> Iterator[tuple[int, object]]:
    """Yield (line number, decoded object) for every non-blank line."""
    for lineno, line in enumerate(source, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusError(f"invalid UTF-8: {exc}", lineno) from None
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"malformed JSON: {exc.msg}", lineno) from None


def load_corpus(source: IO, scheme: LabelScheme, split: str = "unsplit",
                config: TokenizerConfig = DEFAULT_TOKENIZER) -> Corpus:
    items = []
    seen: dict[str, int] = {}
    for lineno, obj in iter_jsonl(source):
        if isinstance(obj, dict) and "_header" in obj:
            continue
        item = parse_record(obj, scheme, config, lineno)
        if item.id in seen:
            raise CorpusError(f"duplicate id (first seen on line {seen[item.id]})", lineno, item.id)
        seen[item.id] = lineno
        items.append(item)
    return Corpus(scheme, tuple(items), split)


def record_json(item: LabeledSentence) -> dict:
    return {
        "id": item.id,
        "text": item.sentence.raw,
        "tokens": list(item.sentence.words),
        "quintuples": [q.to_json() for q in item.quintuples],
    }


def dump_corpus(corpus: Corpus, sink: IO[str]) -> None:
    for item in corpus.items:
        sink.write(json.dumps(record_json(item), ensure_ascii=False) + "\n")


# --- statistics -------------------------------------------------------------

@dataclass(frozen=True)
class StatsReport:
    sentence_count: int
    non_comparative_count: int
    comparative_count: int
    multi_comparative_count: int
    quintuple_count: int
    multi_over_com: float
    com_over_total: float
    quintuples_per_comparative_sentence: float
    distinct_elements: dict[str, int] = field(default_factory=dict)
    element_mentions: dict[str, int] = field(default_factory=dict)
    label_type_count: int = 0
    label_distribution: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "sentence_count": self.sentence_count,
            "non_comparative_count": self.non_comparative_count,
            "comparative_count": self.comparative_count,
            "multi_comparative_count": self.multi_comparative_count,
            "quintuple_count": self.quintuple_count,
            "multi_over_com": self.multi_over_com,
            "com_over_total": self.com_over_total,
            "quintuples_per_comparative_sentence": self.quintuples_per_comparative_sentence,
            "distinct_elements": dict(self.distinct_elements),
            "element_mentions": dict(self.element_mentions),
            "label_type_count": self.label_type_count,
            "label_distribution": dict(self.label_distribution),
        }

    def table(self) -> str:
        rows = [
            ("Sentences", str(self.sentence_count)),
            ("#Non-com", str(self.non_comparative_count)),
            ("#Com", str(self.comparative_count)),
            ("#Multi-com", str(self.multi_comparative_count)),
            ("#Multi-com/#Com", f"{100 * self.multi_over_com:.2f}%"),
            ("#Com/Sentences", f"{100 * self.com_over_total:.2f}%"),
            ("#Quintuples per Sent", f"{self.quintuples_per_comparative_sentence:.2f}"),
        ]
        for role in ROLES:
            name = ROLE_FIELDS[role].capitalize()
            rows.append((f"{name} entities", f"{self.distinct_elements[role]} ({self.element_mentions[role]} mentions)"))
        rows.append(("Label types", str(self.label_type_count)))
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{k:<{width}}  {v:>8}" for k, v in rows)


def _ratio(a: int, b: int) -> float:
    return a / b if b else 0.0


def corpus_stats(corpus: Corpus | Iterable[LabeledSentence], scheme: Optional[LabelScheme] = None) -> StatsReport:
    if isinstance(corpus, Corpus):
        scheme = corpus.scheme
        items = corpus.items
    else:
        items = tuple(corpus)
    n = len(items)
    com = sum(1 for it in items if it.comparative)
    multi = sum(1 for it in items if len(it.quintuples) >= 2)
    nq = sum(len(it.quintuples) for it in items)
    forms: dict[str, set] = {r: set() for r in ROLES}
    mentions = Counter()
    labels = Counter()
    for it in items:
        for q in it.quintuples:
            labels[q.label] += 1
            for role, span in q.spans().items():
                if span is not None:
                    forms[role].add(element_surface(it.sentence, span).lower())
                    mentions[role] += 1
    return StatsReport(
        sentence_count=n,
        non_comparative_count=n - com,
        comparative_count=com,
        multi_comparative_count=multi,
        quintuple_count=nq,
        multi_over_com=_ratio(multi, com),
        com_over_total=_ratio(com, n),
        quintuples_per_comparative_sentence=_ratio(nq, com),
        distinct_elements={r: len(forms[r]) for r in ROLES},
        element_mentions={r: mentions[r] for r in ROLES},
        label_type_count=len(scheme.labels) if scheme is not None else len(labels),
        label_distribution=dict(sorted(labels.items())),
    )
