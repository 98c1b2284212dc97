"""Greedy constrained decoding over a pluggable step generator."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Protocol, Sequence, runtime_checkable

from ..corpus import LabelScheme, Sentence
from ..template import GRAMMAR, TargetGrammar

EOS = "</s>"
# 8 x 10 grammar tokens per tuple x 5 tuples, capped
DEFAULT_MAX_LEN = min(8 * 10 * 5, 256)


class GeneratorError(RuntimeError):
    """Base class for generator failures; carries the request id or step when known."""

    def __init__(self, message: str, request_id: Optional[str] = None, step: Optional[int] = None):
        bits = []
        if request_id is not None:
            bits.append(f"request {request_id}")
        if step is not None:
            bits.append(f"step {step}")
        super().__init__(f"{', '.join(bits)}: {message}" if bits else message)
        self.request_id = request_id
        self.step = step


class ProtocolViolation(GeneratorError):
    pass


class GeneratorTimeout(GeneratorError):
    pass


class ConfigurationError(GeneratorError):
    pass


@dataclass(frozen=True)
class AllowedSet:
    """Tokens a constrained decoder may emit, in tie-break order.

    Order: sentence tokens by first position, then markers, labels, and the
    separator / missing / none / end-of-sequence specials.
    """

    tokens: tuple[str, ...]
    sentence_tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_rank", {t: i for i, t in enumerate(self.tokens)})

    def __contains__(self, token: object) -> bool:
        return token in self._rank

    def __iter__(self):
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def rank(self, token: str) -> int:
        return self._rank[token]

    def as_set(self) -> frozenset:
        return frozenset(self.tokens)


def _unique(seq) -> tuple:
    return tuple(dict.fromkeys(seq))


def build_allowed_set(sentence: Sentence, scheme: LabelScheme, grammar: TargetGrammar = GRAMMAR) -> AllowedSet:
    words = _unique(sentence.words)
    extra = list(grammar.markers) + list(scheme.labels) + list(grammar.specials) + [EOS]
    return AllowedSet(_unique(list(words) + extra), words)


@runtime_checkable
class StepGenerator(Protocol):
    def step(self, input_text: str, prefix: Sequence[str], allowed: AllowedSet) -> Mapping[str, float]:
        """Score every allowed token as the next output token."""


@runtime_checkable
class FreeGenerator(Protocol):
    def generate(self, input_text: str) -> str:
        """Return a complete output string, unconstrained."""


@dataclass(frozen=True)
class GenerationRecord:
    input_text: str
    output_tokens: tuple[str, ...]
    output_text: str
    step_count: int
    terminated_by: str
    constrained: bool = True

    def to_json(self) -> dict:
        return {
            "input": self.input_text,
            "output": self.output_text,
            "output_tokens": list(self.output_tokens),
            "step_count": self.step_count,
            "terminated_by": self.terminated_by,
            "constrained": self.constrained,
        }


def check_scores(scores: Mapping[str, float], allowed: AllowedSet, step: Optional[int] = None,
                 request_id: Optional[str] = None) -> None:
    if not isinstance(scores, Mapping):
        raise ProtocolViolation("scores must be a mapping", request_id, step)
    extra = [t for t in scores if t not in allowed]
    if extra:
        raise ProtocolViolation(f"scored tokens outside the allowed set: {extra[:5]}", request_id, step)
    if len(scores) != len(allowed):
        missing = [t for t in allowed.tokens if t not in scores]
        raise ProtocolViolation(f"no score for allowed tokens: {missing[:5]}", request_id, step)
    for tok, val in scores.items():
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise ProtocolViolation(f"non-finite or non-numeric score for {tok!r}: {val!r}", request_id, step)


def constrained_decode(generator: StepGenerator, sentence: Sentence, prompt: str, allowed: AllowedSet,
                       max_len: int = DEFAULT_MAX_LEN) -> GenerationRecord:
    """Greedy argmax decoding restricted to ``allowed``.

    Ties go to the token ranked earliest in ``allowed``. The end-of-sequence
    token is kept in ``output_tokens`` but not in ``output_text``.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    prefix: list[str] = []
    terminated = "max_len"
    for step in range(max_len):
        scores = generator.step(prompt, tuple(prefix), allowed)
        check_scores(scores, allowed, step)
        best, best_score = None, -math.inf
        for tok in allowed.tokens:
            s = scores[tok]
            if s > best_score:
                best, best_score = tok, s
        prefix.append(best)
        if best == EOS:
            terminated = "eos"
            break
    text = " ".join(t for t in prefix if t != EOS)
    return GenerationRecord(prompt, tuple(prefix), text, len(prefix), terminated)


def free_decode(generator: FreeGenerator, prompt: str) -> GenerationRecord:
    """Unconstrained generation; the output is only filtered later by postprocessing."""
    text = generator.generate(prompt)
    if not isinstance(text, str):
        raise ProtocolViolation(f"free-mode output must be a string, got {type(text).__name__}")
    toks = tuple(text.split())
    return GenerationRecord(prompt, toks, text, len(toks), "eos", constrained=False)
