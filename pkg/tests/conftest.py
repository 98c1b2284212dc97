import json
import os
import sys

import pytest

from coqe.corpus import CAMERA, VCOM, Corpus, LabeledSentence, Quintuple, dump_corpus, make_sentence

HELPERS = os.path.join(os.path.dirname(__file__), "helpers")


def labeled(sid, raw, *quints):
    return LabeledSentence(make_sentence(sid, raw), tuple(quints))


def q(s=None, o=None, a=None, p=None, label="COM"):
    t = lambda x: tuple(x) if x is not None else None
    return Quintuple(t(s), t(o), t(a), t(p), label)


@pytest.fixture
def small_corpus():
    """Two comparative sentences (one with two tuples) and three plain ones."""
    items = (
        labeled("c1", "the iphone has a better battery than the galaxy",
                q(s=[1], o=[8], a=[4], p=[3], label="COM")),
        labeled("c2", "canon is sharper than nikon but nikon is cheaper",
                q(s=[0], o=[4], p=[2], label="COM"), q(s=[4], o=[0], p=[8], label="COM")),
        labeled("n1", "i bought this camera last week"),
        labeled("n2", "shipping was fast"),
        labeled("n3", "the menu is in english ."),
    )
    return Corpus(CAMERA, items)


def write_corpus(path, corpus):
    with open(path, "w", encoding="utf-8") as fh:
        dump_corpus(corpus, fh)
    return str(path)


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        rows = [json.loads(l) for l in fh if l.strip()]
    return [r for r in rows if "_header" not in r]


PYTHON = sys.executable


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
