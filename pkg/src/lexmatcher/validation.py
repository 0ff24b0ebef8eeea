"""Input checks used by the estimators and the public functions."""

from __future__ import annotations

import numbers
from typing import Any

from .corpus_io import Corpus, SentencePair


def check_corpus(X: Any, langs: str | None = None) -> Corpus:
    """Coerce ``X`` into a :class:`Corpus`.

    Accepts a Corpus, a sequence of SentencePair, or a sequence of
    ``(source, target)`` string tuples (indexed by position).
    """
    if isinstance(X, Corpus):
        return X
    if isinstance(X, (str, bytes)):
        raise TypeError("expected a corpus or a sequence of sentence pairs, got a string")
    try:
        items = list(X)
    except TypeError:
        raise TypeError(f"expected a corpus or a sequence of sentence pairs, got {type(X).__name__}") from None
    if all(isinstance(p, SentencePair) for p in items):
        indices = [p.index for p in items]
        if len(set(indices)) != len(indices):
            raise ValueError("sentence pair indices must be unique within a corpus")
        src, tgt = (langs or "en-zh").split("-")
        return Corpus(tuple(items), src, tgt)
    for i, item in enumerate(items):
        if not (isinstance(item, (tuple, list)) and len(item) == 2
                and isinstance(item[0], str) and isinstance(item[1], str)):
            raise TypeError(f"item {i} is neither a SentencePair nor a (source, target) pair of strings")
    return Corpus.from_texts(items, langs or "en-zh")


def check_k(k: Any) -> int:
    if isinstance(k, bool) or not isinstance(k, numbers.Integral):
        raise TypeError(f"k must be an integer, got {type(k).__name__}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return int(k)


def check_positive_int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
