"""Bilingual dictionaries, entity lists and the segment lookup index."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .text import LanguagePair

logger = logging.getLogger(__name__)

DICTIONARY = "dictionary"
ENTITY = "entity"
DICTIONARY_MAX_SOURCE_LEN = 2
DEFAULT_MAX_SEGMENT_LEN = 8

_POS_ALIASES = {
    "n": "noun", "noun": "noun",
    "v": "verb", "verb": "verb",
    "a": "adj", "s": "adj", "adj": "adj", "adjective": "adj",
    "r": "adv", "adv": "adv", "adverb": "adv",
}


class DictionaryFormatError(ValueError):
    pass


def normalize_pos(raw: str | None) -> str | None:
    if raw is None or not raw.strip():
        return None
    return _POS_ALIASES.get(raw.strip().lower(), "other")


@dataclass(frozen=True)
class SensePair:
    """One dictionary sense: a source segment and one of its translations.

    Segments are tuples of lemmas. ``source_text``/``target_text`` keep the
    dictionary's own spelling for display and prompts.
    """

    source_segment: tuple[str, ...]
    target_segment: tuple[str, ...]
    sense_id: str
    pos: str | None = None
    definition: str | None = field(default=None, compare=False)
    origin: str = DICTIONARY
    source_text: str = field(default="", compare=False)
    target_text: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.source_segment or not self.target_segment:
            raise ValueError(f"sense {self.sense_id}: segments must be non-empty")
        if not self.source_text:
            object.__setattr__(self, "source_text", " ".join(self.source_segment))
        if not self.target_text:
            object.__setattr__(self, "target_text", " ".join(self.target_segment))

    @property
    def source_key(self) -> str:
        return " ".join(self.source_segment)

    @property
    def target_key(self) -> str:
        return " ".join(self.target_segment)

    @property
    def identity(self) -> tuple[str, str, str]:
        return self.source_key, self.target_key, self.sense_id


class Lexicon:
    """Immutable set of sense pairs indexed by source lemma key.

    Within one key, dictionary senses precede entity senses; otherwise
    insertion order is kept.
    """

    def __init__(self, entries: Iterable[SensePair] = (), max_segment_len: int = DEFAULT_MAX_SEGMENT_LEN,
                 drop_counts: dict[str, int] | None = None):
        self.max_segment_len = max_segment_len
        self.drop_counts = Counter(drop_counts or {})
        seen = set()
        kept = []
        for e in entries:
            if e.identity in seen:
                logger.warning("duplicate sense %s (%s -> %s); keeping the first", e.sense_id, e.source_key, e.target_key)
                self.drop_counts["duplicate"] += 1
                continue
            seen.add(e.identity)
            kept.append(e)
        self.entries: tuple[SensePair, ...] = tuple(kept)
        index: dict[str, list[SensePair]] = {}
        for e in self.entries:
            index.setdefault(e.source_key, []).append(e)
        self.index: dict[str, tuple[SensePair, ...]] = {
            k: tuple(sorted(v, key=lambda s: s.origin != DICTIONARY)) for k, v in index.items()
        }
        self.longest_source = max((len(e.source_segment) for e in self.entries), default=0)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, sense) -> bool:
        return sense in self.index.get(sense.source_key, ())

    def lookup(self, segment: str | Sequence[str]) -> list[SensePair]:
        key = segment if isinstance(segment, str) else " ".join(segment)
        return list(self.index.get(key, ()))

    def sense_counts(self) -> Counter:
        """Number of distinct sense ids per ``(source_key, pos)``."""
        groups: dict[tuple[str, str | None], set[str]] = {}
        for e in self.entries:
            groups.setdefault((e.source_key, e.pos), set()).add(e.sense_id)
        return Counter({k: len(v) for k, v in groups.items()})

    def __repr__(self) -> str:
        return f"Lexicon({len(self.entries)} entries, max_segment_len={self.max_segment_len})"


def lookup(lexicon: Lexicon, segment: str | Sequence[str]) -> list[SensePair]:
    return lexicon.lookup(segment)


def _split_line(line: str, path, lineno: int, min_cols: int, max_cols: int) -> list[str]:
    cols = line.split("\t")
    if not min_cols <= len(cols) <= max_cols or not all(c.strip() for c in cols[:min_cols]):
        raise DictionaryFormatError(
            f"{path}:{lineno}: expected {min_cols}-{max_cols} tab-separated columns, got {len(cols)}"
        )
    return [c.strip() for c in cols]


def _iter_rows(path, min_cols: int, max_cols: int):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, _split_line(line, path, lineno, min_cols, max_cols)


def make_sense(source: str, target: str, sense_id: str, lang: LanguagePair, pos: str | None = None,
               definition: str | None = None, origin: str = DICTIONARY) -> SensePair | None:
    """Analyze both sides into lemma segments; None if either side is empty after analysis."""
    src = tuple(lang.source.lemmas(source))
    tgt = tuple(lang.target.lemmas(target))
    if not src or not tgt:
        return None
    return SensePair(src, tgt, sense_id, normalize_pos(pos), definition or None, origin, source, target)


def load_dictionary(path: str | Path, lang: LanguagePair | str = "en-zh",
                    max_segment_len: int = DEFAULT_MAX_SEGMENT_LEN) -> Lexicon:
    """Read ``source \\t target \\t pos \\t sense_id [\\t definition]`` rows.

    Sources made only of stopwords, and sources longer than two lemmas, are
    dropped with a warning.
    """
    if isinstance(lang, str):
        lang = LanguagePair.from_tag(lang)
    entries = []
    drops = Counter()
    for lineno, cols in _iter_rows(path, 4, 5):
        source, target, pos, sense_id = cols[:4]
        definition = cols[4] if len(cols) == 5 else None
        sense = make_sense(source, target, sense_id, lang, pos, definition, DICTIONARY)
        if sense is None:
            logger.warning("%s:%d: segment is empty after normalization; dropped", path, lineno)
            drops["empty"] += 1
            continue
        if all(tok in lang.source_stopwords for tok in sense.source_segment):
            logger.warning("%s:%d: source %r consists of stopwords only; dropped", path, lineno, source)
            drops["stopword_only"] += 1
            continue
        if len(sense.source_segment) > DICTIONARY_MAX_SOURCE_LEN:
            logger.warning("%s:%d: dictionary source %r longer than %d lemmas; dropped",
                           path, lineno, source, DICTIONARY_MAX_SOURCE_LEN)
            drops["too_long"] += 1
            continue
        entries.append(sense)
    return Lexicon(entries, max_segment_len, drops)


def merge_entities(lexicon: Lexicon, titles_path: str | Path, lang: LanguagePair | str = "en-zh") -> Lexicon:
    """Add ``source_title \\t target_title`` rows as entity senses.

    Entity sense ids live in their own ``entity:`` namespace, so a title that
    duplicates a dictionary entry is still added.
    """
    if isinstance(lang, str):
        lang = LanguagePair.from_tag(lang)
    entries = list(lexicon.entries)
    drops = Counter(lexicon.drop_counts)
    for lineno, (source, target) in _iter_rows(titles_path, 2, 2):
        sense = make_sense(source, target, f"entity:{source}", lang, None, None, ENTITY)
        if sense is None:
            drops["entity_empty"] += 1
            continue
        if len(sense.source_segment) > lexicon.max_segment_len:
            drops["entity_too_long"] += 1
            continue
        entries.append(sense)
    if drops["entity_too_long"]:
        logger.info("dropped %d entity titles longer than %d lemmas", drops["entity_too_long"], lexicon.max_segment_len)
    return Lexicon(entries, lexicon.max_segment_len, drops)


def candidate_segments(tokens: Sequence[str], stopwords=frozenset(), max_len: int = 2) -> list[tuple[int, str]]:
    """Enumerate lookup keys for a lemmatized sentence as ``(position, key)``.

    Unigrams and bigrams must be free of stopwords. Longer n-grams, used only
    to reach multi-word entities, need non-stopword first and last lemmas.
    Keys are grouped by length (all unigrams, then all bigrams, ...), left to
    right within each length.
    """
    n = len(tokens)
    stop = [t in stopwords for t in tokens]
    out = [(i, tokens[i]) for i in range(n) if not stop[i]]
    if max_len >= 2:
        out.extend((i, tokens[i] + " " + tokens[i + 1]) for i in range(n - 1) if not stop[i] and not stop[i + 1])
    for size in range(3, max_len + 1):
        for i in range(n - size + 1):
            if not stop[i] and not stop[i + size - 1]:
                out.append((i, " ".join(tokens[i : i + size])))
    return out


def dictionary_rows(lexicon: Lexicon) -> list[str]:
    """Serialize entries back into dictionary TSV rows (used for gap files)."""
    rows = []
    for e in lexicon.entries:
        rows.append("\t".join([e.source_text, e.target_text, e.pos or "", e.sense_id, e.definition or ""]))
    return rows
