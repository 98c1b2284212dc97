"""Exact / proportional / binary tuple matching and corpus-level scoring.

Per element k of a gold tuple g and prediction p:

* exact:        every considered element identical
* proportional: sum_k |g_k & p_k| / sum_k |g_k|, or 0 if any g_k & p_k is empty
* binary:       1 if every g_k & p_k is non-empty, else 0

Elements absent on both sides are skipped; absent on one side only zeroes the
tuple. Under Q5 the label acts as a length-1 element matched by equality.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import ROLE_FIELDS, ROLES, Corpus, Quintuple

STRATEGIES = ("exact", "proportional", "binary")
ARITIES = ("Q4", "Q5")
_LETTER = {"E": "exact", "P": "proportional", "B": "binary"}
EXHAUSTIVE_LIMIT = 6


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class MatchMode:
    strategy: str = "exact"
    arity: str = "Q5"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.arity not in ARITIES:
            raise ValueError(f"unknown arity {self.arity!r}")

    @classmethod
    def parse(cls, text: str) -> "MatchMode":
        """Parse ``E-Q5`` style names."""
        letter, _, arity = text.strip().upper().partition("-")
        if letter not in _LETTER:
            raise ValueError(f"bad mode {text!r}; expected one of E,P,B followed by -Q4 or -Q5")
        return cls(_LETTER[letter], arity or "Q5")

    @property
    def name(self) -> str:
        return f"{self.strategy[0].upper()}-{self.arity}"


ALL_MODES = tuple(MatchMode(s, a) for a in ("Q5", "Q4") for s in STRATEGIES)


def match_fraction(g: Quintuple, p: Quintuple, mode: MatchMode) -> Fraction:
    num = den = 0
    for role in ROLES:
        gs, ps = g.span(role), p.span(role)
        if gs is None and ps is None:
            continue
        if gs is None or ps is None:
            return Fraction(0)
        gset, pset = set(gs), set(ps)
        inter = len(gset & pset)
        if inter == 0:
            return Fraction(0)
        if mode.strategy == "exact" and gset != pset:
            return Fraction(0)
        num += inter
        den += len(gset)
    if mode.arity == "Q5":
        if g.label != p.label:
            return Fraction(0)
        num += 1
        den += 1
    if mode.strategy == "proportional":
        return Fraction(num, den) if den else Fraction(1)
    return Fraction(1)


def tuple_match(g: Quintuple, p: Quintuple, mode: MatchMode) -> float:
    return float(match_fraction(g, p, mode))


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    scores: tuple[Fraction, ...]

    @property
    def exact_total(self) -> Fraction:
        return sum(self.scores, Fraction(0))

    @property
    def total(self) -> float:
        return float(self.exact_total)


def _exhaustive(matrix: list[list[Fraction]]) -> list[tuple[int, int]]:
    n_g = len(matrix)
    n_p = len(matrix[0]) if n_g else 0
    best, best_pairs = Fraction(-1), []
    if n_g <= n_p:
        for perm in permutations(range(n_p), n_g):
            total = sum((matrix[i][j] for i, j in enumerate(perm)), Fraction(0))
            if total > best:
                best, best_pairs = total, list(enumerate(perm))
    else:
        for perm in permutations(range(n_g), n_p):
            total = sum((matrix[i][j] for j, i in enumerate(perm)), Fraction(0))
            if total > best:
                best, best_pairs = total, sorted((i, j) for j, i in enumerate(perm))
    return best_pairs


def _optimal(matrix: list[list[Fraction]]) -> list[tuple[int, int]]:
    rows, cols = linear_sum_assignment(np.array(matrix, dtype=float), maximize=True)
    return [(int(i), int(j)) for i, j in zip(rows, cols)]


def match_sets(gold: Sequence[Quintuple], pred: Sequence[Quintuple], mode: MatchMode,
               exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> Assignment:
    """One-to-one assignment of predictions to gold maximizing the total score.

    Small instances are enumerated; larger ones use the Hungarian algorithm.
    Zero-score pairs are dropped from the result.
    """
    if not gold or not pred:
        return Assignment((), ())
    matrix = [[match_fraction(g, p, mode) for p in pred] for g in gold]
    if len(gold) <= exhaustive_limit and len(pred) <= exhaustive_limit:
        pairs = _exhaustive(matrix)
    else:
        pairs = _optimal(matrix)
    kept = [(i, j) for i, j in pairs if matrix[i][j] > 0]
    return Assignment(tuple(kept), tuple(matrix[i][j] for i, j in kept))


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    correct: float = 0.0
    n_pred: int = 0
    n_gold: int = 0

    @classmethod
    def from_counts(cls, correct: float, n_pred: int, n_gold: int) -> "PRF":
        p = correct / n_pred if n_pred else 0.0
        r = correct / n_gold if n_gold else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f, float(correct), n_pred, n_gold)

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "correct": self.correct, "n_pred": self.n_pred, "n_gold": self.n_gold}


Predictions = Mapping[str, Sequence[Quintuple]]


def _check_predictions(corpus: Corpus, predictions: Predictions) -> dict:
    items = corpus.by_id()
    unknown = [sid for sid in predictions if sid not in items]
    if unknown:
        raise EvaluationError(f"predictions reference unknown sentence ids: {sorted(unknown)[:5]}")
    for sid, tuples in predictions.items():
        n = len(items[sid].sentence)
        for q in tuples:
            if q.max_index() >= n:
                raise EvaluationError(f"sentence {sid!r}: predicted span index {q.max_index()} "
                                      f"out of range for {n}-token sentence")
    return items


def evaluate_tuples(corpus: Corpus, predictions: Predictions, mode: MatchMode) -> PRF:
    _check_predictions(corpus, predictions)
    correct = Fraction(0)
    n_pred = n_gold = 0
    for item in corpus:
        pred = predictions.get(item.id, ())
        n_gold += len(item.quintuples)
        n_pred += len(pred)
        correct += match_sets(item.quintuples, pred, mode).exact_total
    return PRF.from_counts(float(correct), n_pred, n_gold)


@dataclass(frozen=True)
class CEEReport:
    per_role: dict
    macro_f1: float
    micro: PRF

    def to_json(self) -> dict:
        return {"per_role": {ROLE_FIELDS[r]: v.to_json() for r, v in self.per_role.items()},
                "macro_f1": self.macro_f1, "micro": self.micro.to_json()}


def evaluate_cee(corpus: Corpus, predictions: Predictions) -> CEEReport:
    """Exact element extraction scores; spans compare by token indices."""
    _check_predictions(corpus, predictions)
    counts = {r: [0, 0, 0] for r in ROLES}  # correct, pred, gold
    for item in corpus:
        pred = predictions.get(item.id, ())
        for role in ROLES:
            g = Counter(q.span(role) for q in item.quintuples if q.span(role) is not None)
            p = Counter(q.span(role) for q in pred if q.span(role) is not None)
            c = counts[role]
            c[0] += sum((g & p).values())
            c[1] += sum(p.values())
            c[2] += sum(g.values())
    per_role = {r: PRF.from_counts(*counts[r]) for r in ROLES}
    macro = sum(v.f1 for v in per_role.values()) / len(ROLES)
    pooled = [sum(counts[r][k] for r in ROLES) for k in range(3)]
    return CEEReport(per_role, macro, PRF.from_counts(*pooled))


@dataclass(frozen=True)
class CPCReport:
    per_label: dict
    macro_f1: float
    macro_f1_present: float

    def to_json(self) -> dict:
        return {"per_label": {k: v.to_json() for k, v in self.per_label.items()},
                "macro_f1": self.macro_f1, "macro_f1_present": self.macro_f1_present}


def evaluate_cpc(corpus: Corpus, predictions: Predictions) -> CPCReport:
    """Per-label F1 where a prediction counts only if it exactly matches (Q5) a gold tuple.

    The macro average runs over every label of the scheme; labels absent from
    both gold and predictions score 0. ``macro_f1_present`` averages over the
    labels that occur in gold.
    """
    _check_predictions(corpus, predictions)
    mode = MatchMode("exact", "Q5")
    per_label = {}
    present = []
    for label in corpus.scheme.labels:
        correct = Fraction(0)
        n_pred = n_gold = 0
        for item in corpus:
            g = [q for q in item.quintuples if q.label == label]
            p = [q for q in predictions.get(item.id, ()) if q.label == label]
            n_gold += len(g)
            n_pred += len(p)
            correct += match_sets(g, p, mode).exact_total
        per_label[label] = PRF.from_counts(float(correct), n_pred, n_gold)
        if n_gold:
            present.append(label)
    macro = sum(v.f1 for v in per_label.values()) / len(per_label)
    macro_present = (sum(per_label[k].f1 for k in present) / len(present)) if present else 0.0
    return CPCReport(per_label, macro, macro_present)


@dataclass
class EvalReport:
    tuples: dict = field(default_factory=dict)
    cee: Optional[CEEReport] = None
    cpc: Optional[CPCReport] = None
    n_gold: int = 0
    n_pred: int = 0

    def to_json(self) -> dict:
        return {
            "tuples": {k: v.to_json() for k, v in self.tuples.items()},
            "cee": self.cee.to_json() if self.cee else None,
            "cpc": self.cpc.to_json() if self.cpc else None,
            "n_gold": self.n_gold,
            "n_pred": self.n_pred,
        }

    def table(self) -> str:
        lines = []
        if self.tuples:
            lines.append(f"{'Mode':<6} {'P':>7} {'R':>7} {'F1':>7}")
            for name, prf in self.tuples.items():
                lines.append(f"{name:<6} {100 * prf.precision:7.2f} {100 * prf.recall:7.2f} {100 * prf.f1:7.2f}")
        if self.cee:
            lines.append("")
            heads = [ROLE_FIELDS[r].capitalize() for r in ROLES] + ["Macro", "Micro"]
            lines.append("CEE-E F1  " + " ".join(f"{h:>9}" for h in heads))
            vals = [self.cee.per_role[r].f1 for r in ROLES] + [self.cee.macro_f1, self.cee.micro.f1]
            lines.append(" " * 10 + " ".join(f"{100 * v:9.2f}" for v in vals))
        if self.cpc:
            lines.append("")
            labels = list(self.cpc.per_label)
            lines.append("CPC-E F1  " + " ".join(f"{h:>7}" for h in labels + ["Macro"]))
            vals = [self.cpc.per_label[k].f1 for k in labels] + [self.cpc.macro_f1]
            lines.append(" " * 10 + " ".join(f"{100 * v:7.2f}" for v in vals))
        return "\n".join(lines)


def evaluate(corpus: Corpus, predictions: Predictions, modes: Sequence[MatchMode] = ALL_MODES) -> EvalReport:
    report = EvalReport()
    for mode in modes:
        report.tuples[mode.name] = evaluate_tuples(corpus, predictions, mode)
    report.cee = evaluate_cee(corpus, predictions)
    report.cpc = evaluate_cpc(corpus, predictions)
    report.n_gold = sum(len(it.quintuples) for it in corpus)
    report.n_pred = sum(len(v) for v in predictions.values())
    return report
