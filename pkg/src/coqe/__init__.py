"""Comparative quintuple extraction: augmentation, serialization, constrained decoding, evaluation."""
from .augment import DEFAULT_ORDERS, TrainingExample, augment_corpus, enumerate_orders, single_task_target
from .corpus import (
    CAMERA,
    VCOM,
    Corpus,
    CorpusError,
    LabeledSentence,
    LabelScheme,
    Quintuple,
    Sentence,
    Token,
    corpus_stats,
    element_surface,
    load_corpus,
    tokenize,
)
from .metrics import MatchMode, evaluate, match_sets, tuple_match
from .postprocess import classify_errors, map_to_spans, validate_tuple
from .template import ElementOrder, PromptStyle, SingleTask, parse_generated, render_prompt, render_target

__version__ = "0.1.0"
