"""Synthetic Zipf-distributed parallel corpora with a one-sense-per-word lexicon."""

from __future__ import annotations

import numpy as np

from lexmatcher.corpus_io import Corpus, SentencePair
from lexmatcher.lexicon import Lexicon, SensePair
from lexmatcher.text import LanguagePair

_CONS = "bcdfghjklmnprtvz"
_VOW = "aeiou"
STOPWORDS = ("the", "of", "and", "a", "to", "in", "is", "it")


def _vocab(rng: np.random.Generator, n: int, lang: LanguagePair) -> list[str]:
    words: list[str] = []
    seen = set(STOPWORDS)
    lem = lang.source.lemmatizer
    while len(words) < n:
        syl = rng.integers(2, 5)
        w = "".join(_CONS[rng.integers(len(_CONS))] + _VOW[rng.integers(len(_VOW))] for _ in range(syl))
        if w not in seen and lem(w) == w:
            seen.add(w)
            words.append(w)
    return words


def _translations(rng: np.random.Generator, n: int) -> list[str]:
    out, seen = [], set()
    while len(out) < n:
        t = "".join(chr(0x4E00 + int(c)) for c in rng.integers(0, 20000, size=3))
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def zipf_corpus(n_pairs: int, vocab_size: int, seed: int, lang: LanguagePair, exponent: float = 1.1,
                n_bigrams: int = 0, min_len: int = 8, max_len: int = 16):
    """Corpus whose source tokens follow a Zipf law, plus a lexicon of one sense per word.

    Each target sentence is the word-by-word translation, with one in five
    translations dropped so that not every source word is grounded.
    """
    rng = np.random.default_rng(seed)
    words = _vocab(rng, vocab_size, lang)
    trans = _translations(rng, vocab_size)
    ranks = np.arange(1, vocab_size + 1, dtype=np.float64)
    p = ranks ** -exponent
    p /= p.sum()

    entries = [SensePair((w,), tuple(t), f"{w}.n.01", "noun") for w, t in zip(words, trans)]
    bigram_ids = rng.integers(0, min(vocab_size, 2000), size=(n_bigrams, 2))
    seen = set()
    for i, j in bigram_ids:
        if i == j or (i, j) in seen:
            continue
        seen.add((i, j))
        # compositional translation, found wherever both words are adjacent and translated
        t = trans[i] + trans[j]
        entries.append(SensePair((words[i], words[j]), tuple(t), f"{words[i]}_{words[j]}.n.01", "noun"))
    lexicon = Lexicon(entries)

    lengths = rng.integers(min_len, max_len + 1, size=n_pairs)
    total = int(lengths.sum())
    toks = rng.choice(vocab_size, size=total, p=p)
    keep = rng.random(total) >= 0.2
    stop_at = rng.random(total) < 0.15
    stop_pick = rng.integers(0, len(STOPWORDS), size=total)
    scores = np.round(rng.random(n_pairs), 3)
    pairs = []
    pos = 0
    for i, n in enumerate(lengths):
        src, tgt = [], []
        for j in range(pos, pos + n):
            if stop_at[j]:
                src.append(STOPWORDS[stop_pick[j]])
            w = toks[j]
            src.append(words[w])
            if keep[j]:
                tgt.append(trans[w])
        pos += n
        pairs.append(SentencePair(i, " ".join(src), "".join(tgt) or "无", float(scores[i])))
    return Corpus(tuple(pairs), lang.source_lang, lang.target_lang), lexicon, words


def synthetic_language_pair() -> LanguagePair:
    return LanguagePair.from_tag("en-zh", source_stopwords=set(STOPWORDS), target_stopwords=set())
