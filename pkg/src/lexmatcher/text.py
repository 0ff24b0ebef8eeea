"""Tokenization, lemmatization and stopword handling shared by every stage."""

from __future__ import annotations

import logging
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

logger = logging.getLogger(__name__)

_HAN = "㐀-䶿一-鿿豈-﫿\U00020000-\U0002a6df"
_CJK_LANGS = {"zh", "ja"}

TOKENIZER_MODES = ("whitespace", "cjk")


class Tokenizer:
    """Split text into tokens and report their character spans.

    ``whitespace`` splits on runs of whitespace. ``cjk`` additionally makes
    every Han character its own token, since Chinese text has no word
    delimiters.
    """

    def __init__(self, mode: str = "whitespace"):
        if mode not in TOKENIZER_MODES:
            raise ValueError(f"unknown tokenizer mode {mode!r}; expected one of {TOKENIZER_MODES}")
        self.mode = mode
        if mode == "cjk":
            self._pattern = re.compile(f"[{_HAN}]|[^\\s{_HAN}]+")
        else:
            self._pattern = re.compile(r"\S+")

    def __call__(self, text: str) -> list[str]:
        if self.mode == "whitespace":
            return text.split()
        return self._pattern.findall(text)

    def spans(self, text: str) -> list[tuple[int, int]]:
        return [m.span() for m in self._pattern.finditer(text)]

    def __repr__(self) -> str:
        return f"Tokenizer(mode={self.mode!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Tokenizer) and other.mode == self.mode

    def __hash__(self) -> int:
        return hash(("Tokenizer", self.mode))


def default_tokenizer(lang: str) -> Tokenizer:
    return Tokenizer("cjk" if lang in _CJK_LANGS else "whitespace")


# (suffix, replacement) applied first-match-wins; see Lemmatizer._apply_rules
ENGLISH_SUFFIX_RULES: tuple[tuple[str, str], ...] = (
    ("sses", "ss"),
    ("ies", "y"),
    ("ches", "ch"),
    ("shes", "sh"),
    ("xes", "x"),
    ("s", ""),
    ("ied", "y"),
    ("ing", ""),
    ("ed", ""),
)

_VOWELS = frozenset("aeiouy")


@dataclass
class Lemmatizer:
    """Exception table plus ordered suffix rules, identity fallback.

    The result is the fixed point of repeatedly applying the table and the
    rules, so ``lemmatize(lemmatize(w)) == lemmatize(w)`` holds for every
    input. Values of the exception table are treated as final lemmas.
    """

    exceptions: dict[str, str] = field(default_factory=dict)
    rules: tuple[tuple[str, str], ...] = ()
    min_stem: int = 3
    _cache: dict[str, str] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self._final = frozenset(self.exceptions.values())

    @classmethod
    def identity(cls) -> "Lemmatizer":
        return cls()

    @classmethod
    def english(cls, exceptions_path: str | Path | None = None) -> "Lemmatizer":
        table = _read_exception_table(exceptions_path) if exceptions_path else _default_english_exceptions()
        return cls(exceptions=table, rules=ENGLISH_SUFFIX_RULES)

    def __call__(self, word: str) -> str:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        lemma = word
        # every step either hits a final lemma or strictly shortens the word
        while True:
            if lemma in self._final:
                break
            if lemma in self.exceptions:
                lemma = self.exceptions[lemma]
                break
            nxt = self._apply_rules(lemma)
            if nxt == lemma:
                break
            lemma = nxt
        self._cache[word] = lemma
        return lemma

    lemmatize = __call__

    def _apply_rules(self, word: str) -> str:
        for suffix, repl in self.rules:
            if not word.endswith(suffix) or len(word) == len(suffix):
                continue
            stem = word[: -len(suffix)]
            if suffix == "s" and stem[-1] in "siu'":
                continue
            if suffix in ("ing", "ed"):
                if suffix == "ed" and stem.endswith("e"):
                    continue
                if not _VOWELS.intersection(stem):
                    continue
                if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in "lsz" and stem[-1] not in _VOWELS:
                    stem = stem[:-1]
            candidate = stem + repl
            if len(candidate) < self.min_stem:
                continue
            return candidate
        return word


def _read_exception_table(path) -> dict[str, str]:
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        _parse_exception_lines(fh, table, str(path))
    return table


def _parse_exception_lines(lines: Iterable[str], table: dict[str, str], origin: str) -> None:
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{origin}:{lineno}: expected 'surface<TAB>lemma'")
        table[parts[0].strip().lower()] = parts[1].strip().lower()


def _default_english_exceptions() -> dict[str, str]:
    table: dict[str, str] = {}
    text = resources.files("lexmatcher").joinpath("data/en_lemma_exceptions.tsv").read_text(encoding="utf-8")
    _parse_exception_lines(text.splitlines(), table, "en_lemma_exceptions.tsv")
    return table


def default_lemmatizer(lang: str, exceptions_path=None) -> Lemmatizer:
    if lang == "en":
        return Lemmatizer.english(exceptions_path)
    return Lemmatizer.identity()


def _strip_punct(token: str) -> tuple[int, int]:
    """Offsets of ``token`` with leading and trailing punctuation removed."""
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start])[0] in "PS":
        start += 1
    while end > start and unicodedata.category(token[end - 1])[0] in "PS":
        end -= 1
    return start, end


class Analyzer:
    """Turns text of one language into normalized lemmas.

    Tokens are lowercased and stripped of surrounding punctuation; tokens
    that are pure punctuation disappear. ``analyze`` also returns the
    character span of each surviving token in the input text.
    """

    def __init__(self, tokenizer: Tokenizer | None = None, lemmatizer: Lemmatizer | None = None):
        self.tokenizer = tokenizer or Tokenizer()
        self.lemmatizer = lemmatizer or Lemmatizer.identity()
        self._token_cache: dict[str, str] = {}

    def _lemma_of(self, token: str) -> str:
        lemma = self._token_cache.get(token)
        if lemma is None:
            start, end = _strip_punct(token)
            core = token[start:end].lower()
            lemma = self.lemmatizer(core) if core else ""
            if len(self._token_cache) < 2_000_000:
                self._token_cache[token] = lemma
        return lemma

    def lemmas(self, text: str) -> list[str]:
        out = []
        for tok in self.tokenizer(text):
            lemma = self._lemma_of(tok)
            if lemma:
                out.append(lemma)
        return out

    def analyze(self, text: str) -> tuple[list[str], list[tuple[int, int]]]:
        lemmas, spans = [], []
        for start, end in self.tokenizer.spans(text):
            s, e = _strip_punct(text[start:end])
            if s == e:
                continue
            lemmas.append(self.lemmatizer(text[start + s : start + e].lower()))
            spans.append((start + s, start + e))
        return lemmas, spans

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_token_cache"] = {}
        return state

    def __repr__(self) -> str:
        return f"Analyzer({self.tokenizer!r})"


def load_stopwords(path: str | Path) -> frozenset[str]:
    """One stopword per line, UTF-8; blank lines and ``#`` comments ignored."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(
            w for w in (line.strip().lower() for line in fh) if w and not w.startswith("#")
        )


def default_stopwords(lang: str) -> frozenset[str]:
    ref = resources.files("lexmatcher").joinpath(f"data/stopwords_{lang}.txt")
    if not ref.is_file():
        return frozenset()
    return frozenset(
        w for w in (line.strip().lower() for line in ref.read_text(encoding="utf-8").splitlines())
        if w and not w.startswith("#")
    )


@dataclass
class LanguagePair:
    """Analyzers and stopword sets for a source/target language pair.

    Stopword sets are stored in lemma space: each listed word is kept as-is
    and its lemma is added, so a token counts as a stopword whenever its
    lemma is listed.
    """

    source_lang: str
    target_lang: str
    source: Analyzer
    target: Analyzer
    source_stopwords: frozenset[str] = frozenset()
    target_stopwords: frozenset[str] = frozenset()

    def __post_init__(self):
        self.source_stopwords = _lemma_closure(self.source_stopwords, self.source.lemmatizer)
        self.target_stopwords = _lemma_closure(self.target_stopwords, self.target.lemmatizer)

    @classmethod
    def from_tag(
        cls,
        langs: str,
        source_stopwords: Iterable[str] | None = None,
        target_stopwords: Iterable[str] | None = None,
        source_lemmatizer: Lemmatizer | None = None,
        target_lemmatizer: Lemmatizer | None = None,
    ) -> "LanguagePair":
        src, tgt = split_langs(langs)
        return cls(
            src,
            tgt,
            Analyzer(default_tokenizer(src), source_lemmatizer or default_lemmatizer(src)),
            Analyzer(default_tokenizer(tgt), target_lemmatizer or default_lemmatizer(tgt)),
            frozenset(default_stopwords(src) if source_stopwords is None else source_stopwords),
            frozenset(default_stopwords(tgt) if target_stopwords is None else target_stopwords),
        )

    @property
    def tag(self) -> str:
        return f"{self.source_lang}-{self.target_lang}"

    def swapped(self) -> "LanguagePair":
        return LanguagePair(
            self.target_lang, self.source_lang, self.target, self.source,
            self.target_stopwords, self.source_stopwords,
        )


def _lemma_closure(words: Iterable[str], lemmatizer: Callable[[str], str]) -> frozenset[str]:
    words = set(words)
    return frozenset(words | {lemmatizer(w) for w in words})


def split_langs(langs: str) -> tuple[str, str]:
    parts = langs.split("-")
    if len(parts) != 2 or not all(parts):
        raise ValueError(f"language pair tag must look like 'en-zh', got {langs!r}")
    return parts[0], parts[1]


def contains_segment(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    """True if ``needle`` occurs as a contiguous run inside ``haystack``."""
    n = len(needle)
    if n == 0 or n > len(haystack):
        return False
    first = needle[0]
    for i in range(len(haystack) - n + 1):
        if haystack[i] == first and list(haystack[i : i + n]) == list(needle):
            return True
    return False


LANGUAGE_NAMES = {
    "en": "English", "zh": "Chinese", "de": "German", "ru": "Russian", "fr": "French",
    "es": "Spanish", "ja": "Japanese", "cs": "Czech", "is": "Icelandic", "uk": "Ukrainian",
}


def language_name(code: str) -> str:
    return LANGUAGE_NAMES.get(code, code)
