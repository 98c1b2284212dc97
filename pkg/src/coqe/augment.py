"""Multi-perspective, multi-task augmentation.

Each comparative sentence is rendered once per element order (the label stays
last) and, optionally, once per single-role extraction task. Non-comparative
sentences get exactly one canonical-order example whose target is ``none``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Corpus, LabeledSentence
from .template import (
    CANONICAL,
    SINGLE_TASKS,
    ElementOrder,
    PromptStyle,
    SingleTask,
    View,
    all_orders,
    render_prompt,
    render_raw,
    render_target,
    to_raw,
)

__all__ = [
    "ElementOrder",
    "SingleTask",
    "TrainingExample",
    "DEFAULT_ORDERS",
    "enumerate_orders",
    "augment_corpus",
    "render_corpus",
    "single_task_target",
    "make_example",
    "augmentation_size",
]


@dataclass(frozen=True)
class TrainingExample:
    input: str
    target: str
    sentence_id: str
    view: str

    def to_json(self) -> dict:
        return {"input": self.input, "target": self.target,
                "sentence_id": self.sentence_id, "view": self.view}

    @classmethod
    def from_json(cls, obj: dict) -> "TrainingExample":
        return cls(obj["input"], obj["target"], obj["sentence_id"], obj["view"])


def enumerate_orders() -> list[ElementOrder]:
    """All 24 orders, lexicographic by role letter."""
    return all_orders()


# canonical, its three non-trivial rotations, and the reversal
DEFAULT_ORDERS = (
    CANONICAL,
    ElementOrder(("O", "A", "P", "S")),
    ElementOrder(("A", "P", "S", "O")),
    ElementOrder(("P", "S", "O", "A")),
    ElementOrder(("P", "A", "O", "S")),
)


def single_task_target(item: LabeledSentence, task: SingleTask) -> str:
    if not item.comparative:
        raise ValueError(f"sentence {item.id!r} is not comparative; single tasks need quintuples")
    raws = [to_raw(q, item.sentence).only(task.markers) for q in item.quintuples]
    return render_raw(raws, task)


def make_example(item: LabeledSentence, view: View, style: PromptStyle = PromptStyle()) -> TrainingExample:
    if isinstance(view, SingleTask):
        target = single_task_target(item, view)
    else:
        target = render_target(item.quintuples, item.sentence, view)
    return TrainingExample(render_prompt(item.sentence, view, style), target, item.id, view.tag)


def _check_orders(orders: Sequence[ElementOrder]) -> None:
    if not orders:
        raise ValueError("at least one element order is required")
    if len(set(orders)) != len(orders):
        raise ValueError("element orders must not repeat")


def augment_corpus(corpus: Corpus | Iterable[LabeledSentence],
                   orders: Sequence[ElementOrder] = DEFAULT_ORDERS,
                   include_single_tasks: bool = True,
                   style: PromptStyle = PromptStyle()) -> list[TrainingExample]:
    orders = list(orders)
    _check_orders(orders)
    out = []
    for item in corpus:
        if not item.comparative:
            out.append(make_example(item, CANONICAL, style))
            continue
        out.extend(make_example(item, order, style) for order in orders)
        if include_single_tasks:
            out.extend(make_example(item, task, style) for task in SINGLE_TASKS)
    return out


def render_corpus(corpus: Corpus | Iterable[LabeledSentence], order: ElementOrder = CANONICAL,
                  style: PromptStyle = PromptStyle()) -> list[TrainingExample]:
    """One example per sentence in a single order, as used for dev/test splits."""
    return [make_example(item, order, style) for item in corpus]


def augmentation_size(comparative: int, non_comparative: int, n_orders: int, single_tasks: bool) -> int:
    return comparative * (n_orders + (len(SINGLE_TASKS) if single_tasks else 0)) + non_comparative
