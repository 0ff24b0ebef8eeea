from __future__ import annotations

import pytest

from lexmatcher.corpus_io import Corpus, SentencePair
from lexmatcher.lexicon import Lexicon, make_sense
from lexmatcher.text import LanguagePair

ACCEPTANCE_RESULTS: list[str] = []


@pytest.fixture
def en_zh():
    return LanguagePair.from_tag("en-zh", source_stopwords={"the", "of", "a", "to", "and", "is", "in"},
                                 target_stopwords={"的", "了"})


@pytest.fixture
def bank_lexicon(en_zh):
    rows = [
        ("bank", "银行", "noun", "bank.n.01", "a financial institution"),
        ("bank", "河岸", "noun", "bank.n.02", "sloping land beside water"),
        ("take over", "接管", "verb", "take_over.v.01", None),
        ("river", "河", "noun", "river.n.01", None),
    ]
    return Lexicon([make_sense(s, t, sid, en_zh, pos, d) for s, t, pos, sid, d in rows])


def make_corpus(rows, scores=None, langs="en-zh"):
    src, tgt = langs.split("-")
    pairs = tuple(
        SentencePair(i, s, t, None if scores is None else scores[i]) for i, (s, t) in enumerate(rows)
    )
    return Corpus(pairs, src, tgt)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
