"""Seeded synthetic COQE corpora for tests and smoke runs.

With ``unique_elements`` every element word occurs exactly once in its
sentence, which makes surface-to-index mapping unambiguous, so gold spans
survive a render/parse/map round trip unchanged.
"""
from __future__ import annotations

import random
from typing import Optional

from .corpus import CAMERA, ROLE_FIELDS, ROLES, Corpus, LabeledSentence, LabelScheme, Quintuple, make_sentence

CONTENT = (
    "iphone galaxy pixel nikon canon sony lumix fuji leica olympus pentax ricoh "
    "battery screen lens zoom sensor shutter flash grip body price weight menu "
    "autofocus viewfinder display video color noise design strap button "
    "better worse sharper faster slower cheaper brighter heavier lighter larger "
    "smaller best worst same similar different unlike superior inferior equal "
    "quality life speed range resolution performance build value"
).split()
FILLER = "the a this that is was than of with and but it its my for in on as much more less very".split()
TRICKY = ["none", ";", "[", "]", "UNK", "S", "L", ":", "extract"]
PUNCT = [",", ".", "!", "?", ";"]


def _span(rng: random.Random, free: list[int], max_len: int = 3) -> Optional[tuple[int, ...]]:
    if not free:
        return None
    start = rng.choice(free)
    length = rng.randint(1, max_len)
    if rng.random() < 0.15 and start + 2 in free:
        return (start, start + 2)  # non-contiguous element
    span = [start]
    for i in range(start + 1, start + length):
        if i in free:
            span.append(i)
        else:
            break
    return tuple(span)


def synth_sentence(sid: str, rng: random.Random, scheme: LabelScheme, n_quints: int,
                   unique_elements: bool = True, tricky: bool = False) -> LabeledSentence:
    length = rng.randint(6, 16)
    slots = list(range(length))
    quints = []
    for _ in range(n_quints):
        spans = {}
        roles = [r for r in ROLES if rng.random() < 0.8] or [rng.choice(ROLES)]
        for role in roles:
            # reuse an earlier tuple's span now and then, as real multi-comparisons do
            if quints and rng.random() < 0.3 and quints[-1].span(role) is not None:
                spans[role] = quints[-1].span(role)
            else:
                spans[role] = _span(rng, slots)
        spans = {r: s for r, s in spans.items() if s}
        if not spans:
            spans = {"P": (rng.randrange(length),)}
        quints.append(Quintuple(label=rng.choice(scheme.labels),
                                **{ROLE_FIELDS[r]: spans.get(r) for r in ROLES}))

    element_pos = sorted({i for q in quints for s in q.spans().values() if s for i in s})
    words: list[Optional[str]] = [None] * length
    if unique_elements:
        pool = rng.sample(CONTENT, len(element_pos))
        for i, w in zip(element_pos, pool):
            words[i] = w
        used = set(pool)
        fill = [w for w in FILLER + CONTENT if w not in used]
    else:
        fill = CONTENT + FILLER + (TRICKY if tricky else [])
    for i in range(length):
        if words[i] is None:
            words[i] = rng.choice(fill)
    if not unique_elements and tricky:
        for i in range(length):
            if rng.random() < 0.1:
                words[i] = rng.choice(TRICKY + PUNCT)

    tokens = list(words)
    raw = " ".join(tokens)
    # sentence-final punctuation glued to the last word, as in real reviews
    if unique_elements and rng.random() < 0.5:
        tokens.append(rng.choice(PUNCT[:4]))
        raw = raw + tokens[-1]
    sentence = make_sentence(sid, raw, tokens)
    return LabeledSentence(sentence, tuple(quints))


def synth_corpus(n: int, seed: int = 0, scheme: LabelScheme = CAMERA, comparative: float = 0.5,
                 multi: float = 0.4, unique_elements: bool = True, tricky: bool = False,
                 split: str = "unsplit") -> Corpus:
    """``comparative`` is the share of comparative sentences, ``multi`` the share of
    comparative sentences carrying 2-4 quintuples."""
    rng = random.Random(seed)
    items = []
    for k in range(n):
        if rng.random() < comparative:
            nq = rng.randint(2, 4) if rng.random() < multi else 1
        else:
            nq = 0
        items.append(synth_sentence(f"s{k:05d}", rng, scheme, nq, unique_elements, tricky))
    return Corpus(scheme, tuple(items), split)


def corpus_with_counts(total: int, comparative: int, multi: int, seed: int = 0,
                       scheme: LabelScheme = CAMERA) -> Corpus:
    """Corpus with exact sentence-level counts, e.g. to mirror published statistics."""
    if not (0 <= multi <= comparative <= total):
        raise ValueError("need 0 <= multi <= comparative <= total")
    rng = random.Random(seed)
    sizes = [2] * multi + [1] * (comparative - multi) + [0] * (total - comparative)
    rng.shuffle(sizes)
    items = [synth_sentence(f"s{k:05d}", rng, scheme, nq) for k, nq in enumerate(sizes)]
    return Corpus(scheme, tuple(items))
