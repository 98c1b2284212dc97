"""Reference generators: an exact oracle and a seeded corruptor.

Both replay a fixed token script. The corruptor edits the gold script once, at
construction, so every decode from the same (gold, noise, seed) is identical.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, fields
from typing import Optional, Sequence

from ..augment import TrainingExample
from ..template import GRAMMAR, MARKERS, ElementOrder, parse_generated, view_from_tag
from .core import EOS, AllowedSet, ConfigurationError


class ScriptedGenerator:
    """Scores the next script token 1.0 and everything else 0.0, then emits EOS."""

    def __init__(self, script: Sequence[str], text: Optional[str] = None):
        self.script = tuple(script)
        self.text = " ".join(self.script) if text is None else text
        self._checked: Optional[AllowedSet] = None

    def _check(self, allowed: AllowedSet) -> None:
        if self._checked is allowed:
            return
        bad = [t for t in self.script if t not in allowed]
        if bad:
            raise ConfigurationError(f"gold target has tokens outside the allowed set: {bad[:5]}")
        self._checked = allowed

    def next_token(self, position: int, allowed: AllowedSet) -> str:
        return self.script[position] if position < len(self.script) else EOS

    def step(self, input_text: str, prefix: Sequence[str], allowed: AllowedSet) -> dict[str, float]:
        self._check(allowed)
        scores = dict.fromkeys(allowed.tokens, 0.0)
        scores[self.next_token(len(prefix), allowed)] = 1.0
        return scores

    def generate(self, input_text: str) -> str:
        return self.text


def oracle_generator(gold: TrainingExample) -> ScriptedGenerator:
    return ScriptedGenerator(gold.target.split(), gold.target)


@dataclass(frozen=True)
class CorruptionConfig:
    drop: float = 0.0
    swap: float = 0.0
    substitute: float = 0.0
    truncate: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            p = getattr(self, f.name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"corruption probability {f.name}={p} outside [0, 1]")

    @classmethod
    def only(cls, kind: str, p: float = 1.0) -> "CorruptionConfig":
        return cls(**{kind: p})


CORRUPTION_KINDS = tuple(f.name for f in fields(CorruptionConfig))


class _Substituted(str):
    original: str


HALLUCINATIONS = ("amazing", "superb", "gorgeous", "sluggish", "flimsy", "vivid", "crisp", "pricier")


class CorruptingGenerator(ScriptedGenerator):
    """Replays a corrupted copy of the gold target.

    Per tuple: ``drop`` blanks one present element to [UNK]; ``swap`` exchanges
    two element blocks; ``substitute`` replaces one element word with a word
    absent from the input. Per output: ``truncate`` cuts inside the last tuple,
    before its final marker. Under constrained decoding a substituted word is
    not allowed, so the generator falls back to a different sentence word:
    its hallucinations are wrong-but-allowed tokens.
    """

    def __init__(self, gold: TrainingExample, noise: CorruptionConfig = CorruptionConfig(), seed: int = 0):
        self.gold = gold
        self.noise = noise
        self.seed = seed
        self._fallback: dict[int, str] = {}
        self.substituted: dict[int, str] = {}  # script position -> original word
        super().__init__(self._corrupt(random.Random(seed)))

    def _hallucination(self, rng: random.Random) -> str:
        seen = self.gold.input.lower()
        options = [w for w in HALLUCINATIONS if w not in seen]
        return rng.choice(options) if options else "hallucinated"

    def _corrupt(self, rng: random.Random) -> list[str]:
        view = view_from_tag(self.gold.view)
        parsed = parse_generated(self.gold.target, view)
        if not parsed.tuples:
            return self.gold.target.split()
        element_roles = [r for r in view.markers if r != "L"]
        blocks_per_tuple = []
        for t in parsed.tuples:
            blocks = {r: (t.get(r).split() if t.get(r) else None) for r in view.markers}
            order = list(view.markers)
            present = [r for r in element_roles if blocks[r]]
            if present and rng.random() < self.noise.drop:
                blocks[rng.choice(present)] = None
            present = [r for r in element_roles if blocks[r]]
            if present and rng.random() < self.noise.substitute:
                role = rng.choice(present)
                words = list(blocks[role])
                k = rng.randrange(len(words))
                sub = _Substituted(self._hallucination(rng))
                sub.original = words[k]
                words[k] = sub
                blocks[role] = words
            if len(element_roles) >= 2 and rng.random() < self.noise.swap:
                i, j = rng.sample(range(len(element_roles)), 2)
                order[i], order[j] = order[j], order[i]
            blocks_per_tuple.append((order, blocks))

        script: list[str] = []
        last_start = 0
        for k, (order, blocks) in enumerate(blocks_per_tuple):
            if k:
                script.append(GRAMMAR.separator)
            last_start = len(script)
            for role in order:
                script.append(MARKERS[role])
                script.extend(blocks[role] or [GRAMMAR.missing])

        if rng.random() < self.noise.truncate:
            final_marker = max(i for i in range(last_start, len(script)) if script[i] in MARKERS.values())
            if isinstance(view, ElementOrder):
                cut = rng.randint(last_start + 1, final_marker)
            else:
                cut = last_start + 1
            script = script[:cut]

        for i, tok in enumerate(script):
            if isinstance(tok, _Substituted):
                self.substituted[i] = tok.original
        return [str(t) for t in script]

    def _check(self, allowed: AllowedSet) -> None:
        # substituted words are expected to fall outside the allowed set
        pass

    def next_token(self, position: int, allowed: AllowedSet) -> str:
        tok = super().next_token(position, allowed)
        if tok in allowed:
            return tok
        if position not in self._fallback:
            rng = random.Random(self.seed * 1_000_003 + position)
            original = self.substituted.get(position)
            options = [w for w in allowed.sentence_tokens if w != original] or [GRAMMAR.missing]
            self._fallback[position] = rng.choice(options)
        return self._fallback[position]


def corrupting_generator(gold: TrainingExample, noise: CorruptionConfig = CorruptionConfig(),
                         seed: int = 0) -> CorruptingGenerator:
    return CorruptingGenerator(gold, noise, seed)
