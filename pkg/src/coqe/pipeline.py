"""Per-sentence inference: prompt, decode, parse, map, validate, classify."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .augment import TrainingExample, make_example
from .corpus import Corpus, LabeledSentence, Quintuple
from .decoding import (
    DEFAULT_MAX_LEN,
    CorruptionConfig,
    GenerationRecord,
    GeneratorError,
    build_allowed_set,
    constrained_decode,
    corrupting_generator,
    free_decode,
    oracle_generator,
)
from .postprocess import ErrorReport, UnmappableTuple, classify_errors, map_to_spans, validate_tuple
from .template import CANONICAL, ElementOrder, PromptStyle, parse_generated

GeneratorFactory = Callable[[LabeledSentence, TrainingExample], object]


@dataclass
class Prediction:
    sentence_id: str
    record: Optional[GenerationRecord]
    quintuples: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    rejections: list = field(default_factory=list)
    dropped_words: list = field(default_factory=list)
    errors: ErrorReport = field(default_factory=ErrorReport)
    failed: bool = False
    failure: Optional[str] = None

    def to_json(self) -> dict:
        rec = self.record.to_json() if self.record else {}
        return {
            "id": self.sentence_id,
            **rec,
            "quintuples": [q.to_json() for q in self.quintuples],
            "diagnostics": [{"kind": d.kind, "position": d.position} for d in self.diagnostics],
            "rejections": self.rejections,
            "dropped_words": [list(w) for w in self.dropped_words],
            "errors": self.errors.to_json(),
            "failed": self.failed,
            "failure": self.failure,
        }


def postprocess_output(item: LabeledSentence, text: str, scheme, order: ElementOrder = CANONICAL,
                       with_gold: bool = True) -> tuple[list[Quintuple], Prediction]:
    parse = parse_generated(text, order)
    mapped, unmappable, accepted, rejections = [], [], [], []
    for raw in parse.tuples:
        try:
            m = map_to_spans(raw, item.sentence)
        except UnmappableTuple as exc:
            unmappable.append(exc)
            rejections.append("unmappable")
            continue
        mapped.append(m)
        q, reason = validate_tuple(m, scheme)
        if q is None:
            rejections.append(reason)
        else:
            accepted.append(q)
    errors = classify_errors(parse, mapped, item.sentence, unmappable,
                             rejected=sum(1 for r in rejections if r != "unmappable"),
                             gold=item.quintuples if with_gold else None)
    pred = Prediction(item.id, None, accepted, list(parse.diagnostics), rejections,
                      [w for m in mapped for w in m.dropped_words]
                      + [w for u in unmappable for w in u.dropped_words], errors)
    return accepted, pred


def decode_item(item: LabeledSentence, generator, scheme, style: PromptStyle = PromptStyle(),
                mode: str = "step", max_len: int = DEFAULT_MAX_LEN,
                order: ElementOrder = CANONICAL) -> Prediction:
    prompt = make_example(item, order, style).input
    try:
        if mode == "step":
            allowed = build_allowed_set(item.sentence, scheme)
            record = constrained_decode(generator, item.sentence, prompt, allowed, max_len)
        else:
            record = free_decode(generator, prompt)
    except GeneratorError as exc:
        return Prediction(item.id, None, failed=True, failure=str(exc),
                          errors=ErrorReport(sentences=1))
    _, pred = postprocess_output(item, record.output_text, scheme, order)
    pred.record = record
    return pred


def reference_factory(kind: str, noise: CorruptionConfig = CorruptionConfig(), seed: int = 0) -> GeneratorFactory:
    """Build per-sentence oracle or corrupting generators keyed on the gold example."""
    if kind == "oracle":
        return lambda item, gold: oracle_generator(gold)
    if kind == "corrupt":
        # one independent stream per sentence, stable under reordering
        return lambda item, gold: corrupting_generator(gold, noise, _mix(seed, item.id))
    raise ValueError(f"unknown reference generator {kind!r}")


def _mix(seed: int, sid: str) -> int:
    h = 1469598103934665603
    for b in f"{seed}:{sid}".encode("utf-8"):
        h = ((h ^ b) * 1099511628211) & 0xFFFFFFFFFFFFFFFF
    return h


def decode_corpus(corpus: Corpus | Iterable[LabeledSentence], factory: GeneratorFactory, scheme,
                  style: PromptStyle = PromptStyle(), mode: str = "step",
                  max_len: int = DEFAULT_MAX_LEN) -> list[Prediction]:
    out = []
    for item in sorted(corpus, key=lambda it: it.id):
        gold = make_example(item, CANONICAL, style)
        out.append(decode_item(item, factory(item, gold), scheme, style, mode, max_len))
    return out


def shared_factory(generator) -> GeneratorFactory:
    return lambda item, gold: generator
