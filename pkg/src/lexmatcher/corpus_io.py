"""Reading, writing, scoring and deduplicating line-aligned parallel corpora."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .text import split_langs

logger = logging.getLogger(__name__)

SCORE_SCALES = ("unit", "percent")
DEDUP_MODES = ("pair", "source", "target")


class AlignmentError(ValueError):
    """Two files that must be line-aligned have different line counts."""


class ScoreFileError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class SentencePair:
    index: int
    source_text: str
    target_text: str
    quality_score: float | None = None

    def __post_init__(self):
        if not self.source_text.strip() or not self.target_text.strip():
            raise ValueError(f"pair {self.index}: source and target must be non-empty")


@dataclass(frozen=True)
class Corpus:
    """An ordered, immutable sequence of sentence pairs."""

    pairs: tuple[SentencePair, ...]
    source_lang: str = "en"
    target_lang: str = "zh"

    def __post_init__(self):
        if not isinstance(self.pairs, tuple):
            object.__setattr__(self, "pairs", tuple(self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[SentencePair]:
        return iter(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    @property
    def langs(self) -> str:
        return f"{self.source_lang}-{self.target_lang}"

    def with_pairs(self, pairs: Iterable[SentencePair]) -> "Corpus":
        return Corpus(tuple(pairs), self.source_lang, self.target_lang)

    @classmethod
    def from_texts(cls, texts: Iterable[tuple[str, str]], langs: str = "en-zh",
                   scores: Sequence[float] | None = None) -> "Corpus":
        src, tgt = split_langs(langs)
        pairs = []
        for i, (s, t) in enumerate(texts):
            pairs.append(SentencePair(i, s, t, None if scores is None else scores[i]))
        return cls(tuple(pairs), src, tgt)


def _read_lines(path: str | Path) -> list[str]:
    # binary split on b"\n" only, so a stray "\r" inside a line never splits it
    with open(path, "rb") as fh:
        lines = []
        for raw in fh:
            line = raw.decode("utf-8")
            if line.endswith("\n"):
                line = line[:-1]
            if line.endswith("\r"):
                line = line[:-1]
            lines.append(line)
    return lines


def load_corpus(source_path: str | Path, target_path: str | Path, langs: str = "en-zh") -> Corpus:
    """Load two line-aligned UTF-8 files into a :class:`Corpus`.

    Pair indices are 0-based line numbers. Lines where either side is blank
    cannot form a pair and are skipped (with a warning), so indices may have
    gaps but always point back at the on-disk line.
    """
    src_lang, tgt_lang = split_langs(langs)
    src_lines = _read_lines(source_path)
    tgt_lines = _read_lines(target_path)
    if len(src_lines) != len(tgt_lines):
        raise AlignmentError(
            f"{source_path} has {len(src_lines)} lines but {target_path} has {len(tgt_lines)}"
        )
    pairs = []
    skipped = 0
    for i, (s, t) in enumerate(zip(src_lines, tgt_lines)):
        if not s.strip() or not t.strip():
            skipped += 1
            continue
        pairs.append(SentencePair(i, s, t))
    if skipped:
        logger.warning("skipped %d line pairs with an empty side", skipped)
    return Corpus(tuple(pairs), src_lang, tgt_lang)


def write_corpus(corpus: Iterable[SentencePair], source_path: str | Path, target_path: str | Path) -> None:
    with open(source_path, "w", encoding="utf-8", newline="\n") as fs, \
            open(target_path, "w", encoding="utf-8", newline="\n") as ft:
        for pair in corpus:
            fs.write(pair.source_text + "\n")
            ft.write(pair.target_text + "\n")


def write_scores(corpus: Iterable[SentencePair], path: str | Path) -> None:
    """Write unit-scale scores aligned with ``corpus``; missing scores as empty lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pair in corpus:
            fh.write(("" if pair.quality_score is None else repr(pair.quality_score)) + "\n")


def attach_scores(corpus: Corpus, scores_path: str | Path, scale: str = "percent") -> Corpus:
    """Set each pair's quality score from a one-number-per-line sidecar file.

    The score file is aligned to the on-disk line numbers (``pair.index``),
    so it may be longer than the corpus when blank lines were skipped, but it
    must cover every pair. ``scale="percent"`` divides by 100; an empty line
    leaves the score unset.
    """
    if scale not in SCORE_SCALES:
        raise ValueError(f"score scale must be one of {SCORE_SCALES}, got {scale!r}")
    lines = _read_lines(scores_path)
    expected = corpus.pairs[-1].index + 1 if corpus.pairs else 0
    if len(lines) != expected and len(lines) != len(corpus):
        raise ScoreFileError(f"{scores_path} has {len(lines)} scores but the corpus needs {expected}")
    by_position = len(lines) == len(corpus) and len(lines) != expected
    out = []
    for pos, pair in enumerate(corpus.pairs):
        lineno = pos if by_position else pair.index
        raw = lines[lineno].strip()
        if not raw:
            out.append(replace(pair, quality_score=None))
            continue
        try:
            value = float(raw)
        except ValueError:
            raise ScoreFileError(f"{scores_path}:{lineno + 1}: not a number: {raw!r}") from None
        if scale == "percent":
            value = value / 100
        elif not 0.0 <= value <= 1.0:
            raise ScoreFileError(
                f"{scores_path}:{lineno + 1}: unit-scale score {value} outside [0, 1]; use scale='percent'"
            )
        out.append(replace(pair, quality_score=value))
    return corpus.with_pairs(out)


def _norm(text: str) -> str:
    return " ".join(text.split())


def dedup_key(pair: SentencePair, mode: str = "pair"):
    if mode == "pair":
        return _norm(pair.source_text), _norm(pair.target_text)
    if mode == "source":
        return _norm(pair.source_text)
    if mode == "target":
        return _norm(pair.target_text)
    raise ValueError(f"dedup mode must be one of {DEDUP_MODES}, got {mode!r}")


def deduplicate(corpus: Corpus, mode: str = "pair") -> Corpus:
    """Keep the first occurrence of each whitespace-normalized pair.

    Casing is left alone. ``mode`` switches to per-side deduplication.
    """
    seen = set()
    kept = []
    for pair in corpus:
        key = dedup_key(pair, mode)
        if key in seen:
            continue
        seen.add(key)
        kept.append(pair)
    return corpus.with_pairs(kept)


class Deduplicator(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping :func:`deduplicate`.

    Parameters
    ----------
    mode: {"pair", "source", "target"}, default "pair"
        What counts as a duplicate.
    """

    def __init__(self, mode: str = "pair"):
        self.mode = mode

    def fit(self, X, y=None):
        if self.mode not in DEDUP_MODES:
            raise ValueError(f"mode must be one of {DEDUP_MODES}, got {self.mode!r}")
        return self

    def transform(self, X):
        from .validation import check_corpus

        return deduplicate(check_corpus(X), self.mode)
