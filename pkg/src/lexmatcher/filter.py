"""Rule-based corpus cleaning plus the quality-estimation threshold."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .corpus_io import DEDUP_MODES, Corpus, SentencePair, dedup_key
from .text import Lemmatizer, LanguagePair, Tokenizer, _strip_punct

RULES = ("duplicate", "length", "ratio", "repeat", "content", "quality")

TokenizerLike = Callable[[str], list[str]]


def _frac(value) -> Fraction:
    # str() first so 0.3 becomes exactly 3/10 rather than its binary expansion
    return value if isinstance(value, Fraction) else Fraction(str(value))


@dataclass
class FilterConfig:
    max_words: int = 100
    max_word_chars: int = 40
    min_len_ratio: Fraction = Fraction(1, 3)
    max_len_ratio: Fraction = Fraction(3)
    max_repeat_ratio: Fraction = Fraction(3, 10)
    content_word_lo: Fraction = Fraction(3, 10)
    content_word_hi: Fraction = Fraction(4, 5)
    min_quality: float = 0.40
    content_rule_inverted: bool = False
    dedup_mode: str = "pair"

    def __post_init__(self):
        for name in ("min_len_ratio", "max_len_ratio", "max_repeat_ratio", "content_word_lo", "content_word_hi"):
            setattr(self, name, _frac(getattr(self, name)))
        self.min_quality = float(self.min_quality)
        if not 0 < self.min_len_ratio < 1 < self.max_len_ratio:
            raise ValueError("need 0 < min_len_ratio < 1 < max_len_ratio")
        if not 0 < self.max_repeat_ratio < 1:
            raise ValueError("need 0 < max_repeat_ratio < 1")
        if not 0 <= self.content_word_lo < self.content_word_hi <= 1:
            raise ValueError("need 0 <= content_word_lo < content_word_hi <= 1")
        if not 0.0 <= self.min_quality <= 1.0:
            raise ValueError("min_quality is unit-scale and must lie in [0, 1]")
        if self.max_words < 1 or self.max_word_chars < 1:
            raise ValueError("max_words and max_word_chars must be positive")
        if self.dedup_mode not in DEDUP_MODES:
            raise ValueError(f"dedup_mode must be one of {DEDUP_MODES}")

    @classmethod
    def from_dict(cls, data: dict) -> "FilterConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise KeyError(unknown[0])
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, Fraction):
                out[k] = str(v)
        return out


@dataclass(frozen=True)
class Decision:
    keep: bool
    rule: str
    reason: str = ""

    def __bool__(self) -> bool:
        return self.keep


@dataclass
class FilterReport:
    input_size: int = 0
    output_size: int = 0
    rejected: dict[str, int] = field(default_factory=lambda: dict.fromkeys(RULES, 0))
    unscored: int = 0

    def to_dict(self) -> dict:
        return {
            "input": self.input_size,
            "output": self.output_size,
            "rejected": dict(self.rejected),
            "unscored": self.unscored,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sides(obj, default):
    if obj is None:
        return default, default
    if isinstance(obj, (tuple, list)):
        return obj[0], obj[1]
    return obj, obj


def _token_lists(pair: SentencePair, tokenizer) -> tuple[list[str], list[str]]:
    src_tok, tgt_tok = _sides(tokenizer, Tokenizer())
    return src_tok(pair.source_text), tgt_tok(pair.target_text)


def rule_length(pair: SentencePair, cfg: FilterConfig, tokenizer=None) -> Decision:
    """Reject over-long sentences or sentences with an over-long token."""
    for side, tokens in zip(("source", "target"), _token_lists(pair, tokenizer)):
        if len(tokens) > cfg.max_words:
            return Decision(False, "length", f"{side} has {len(tokens)} tokens > {cfg.max_words}")
        longest = max((len(t) for t in tokens), default=0)
        if longest > cfg.max_word_chars:
            return Decision(False, "length", f"{side} has a {longest}-character token > {cfg.max_word_chars}")
    return Decision(True, "length")


def rule_ratio(pair: SentencePair, cfg: FilterConfig, tokenizer=None) -> Decision:
    src, tgt = _token_lists(pair, tokenizer)
    if not src or not tgt:
        return Decision(False, "ratio", "empty side")
    ratio = Fraction(len(src), len(tgt))
    if ratio < cfg.min_len_ratio or ratio > cfg.max_len_ratio:
        return Decision(False, "ratio", f"length ratio {len(src)}/{len(tgt)} outside "
                                        f"[{cfg.min_len_ratio}, {cfg.max_len_ratio}]")
    return Decision(True, "ratio")


def repeat_ratio(tokens: Sequence[str]) -> Fraction:
    """Frequency of the most common token over the token count (0 when empty)."""
    if not tokens:
        return Fraction(0)
    return Fraction(Counter(tokens).most_common(1)[0][1], len(tokens))


def rule_repeat(pair: SentencePair, cfg: FilterConfig, tokenizer=None) -> Decision:
    for side, tokens in zip(("source", "target"), _token_lists(pair, tokenizer)):
        r = repeat_ratio(tokens)
        if r > cfg.max_repeat_ratio:
            return Decision(False, "repeat", f"{side} repeat ratio {r} > {cfg.max_repeat_ratio}")
    return Decision(True, "repeat")


def content_ratio(tokens: Sequence[str], stopwords, lemmatizer: Callable[[str], str] | None = None) -> Fraction:
    """Share of tokens that are content words.

    A content word is a token whose lowercased, punctuation-stripped lemma is
    neither empty nor a stopword.
    """
    if not tokens:
        return Fraction(0)
    lemmatizer = lemmatizer or Lemmatizer.identity()
    content = 0
    for tok in tokens:
        s, e = _strip_punct(tok)
        core = tok[s:e].lower()
        if core and core not in stopwords and lemmatizer(core) not in stopwords:
            content += 1
    return Fraction(content, len(tokens))


def rule_content_words(pair: SentencePair, cfg: FilterConfig, tokenizer=None, stopwords=None,
                       lemmatizers=None) -> Decision:
    """Keep pairs whose content-word share lies in ``[lo, hi]`` on both sides.

    With ``cfg.content_rule_inverted`` the band is rejected instead.
    """
    stops = _sides(stopwords, frozenset())
    lemms = _sides(lemmatizers, None)
    for side, tokens, stop, lem in zip(("source", "target"), _token_lists(pair, tokenizer), stops, lemms):
        r = content_ratio(tokens, stop, lem)
        inside = cfg.content_word_lo <= r <= cfg.content_word_hi
        if inside == cfg.content_rule_inverted:
            where = "inside" if inside else "outside"
            return Decision(False, "content", f"{side} content-word share {r} {where} "
                                              f"[{cfg.content_word_lo}, {cfg.content_word_hi}]")
    return Decision(True, "content")


def rule_quality(pair: SentencePair, cfg: FilterConfig) -> Decision:
    if pair.quality_score is None:
        return Decision(True, "quality", "unscored")
    if pair.quality_score < cfg.min_quality:
        return Decision(False, "quality", f"score {pair.quality_score} < {cfg.min_quality}")
    return Decision(True, "quality")


def run_filters(corpus: Corpus, cfg: FilterConfig | None = None, tokenizer=None, stopwords=None,
                lemmatizers=None) -> tuple[Corpus, FilterReport]:
    """Apply deduplication then length, ratio, repeat, content and quality rules.

    Each rejected pair is attributed to the first rule it fails; retained
    pairs keep their order.
    """
    cfg = cfg or FilterConfig()
    report = FilterReport(input_size=len(corpus))
    seen = set()
    kept = []
    for pair in corpus:
        key = dedup_key(pair, cfg.dedup_mode)
        if key in seen:
            report.rejected["duplicate"] += 1
            continue
        seen.add(key)
        for decision in (
            rule_length(pair, cfg, tokenizer),
            rule_ratio(pair, cfg, tokenizer),
            rule_repeat(pair, cfg, tokenizer),
            rule_content_words(pair, cfg, tokenizer, stopwords, lemmatizers),
            rule_quality(pair, cfg),
        ):
            if not decision:
                report.rejected[decision.rule] += 1
                break
        else:
            if pair.quality_score is None:
                report.unscored += 1
            kept.append(pair)
    report.output_size = len(kept)
    return corpus.with_pairs(kept), report


class CorpusFilter(TransformerMixin, BaseEstimator):
    """Stateless transformer running :func:`run_filters`.

    Parameters
    ----------
    config: FilterConfig or None
        Thresholds; defaults to ``FilterConfig()``.
    language_pair: LanguagePair or None
        Supplies per-side tokenizers, lemmatizers and stopwords. When None a
        whitespace tokenizer and empty stopword sets are used.

    After ``transform`` the report of the last call is in ``report_``.
    """

    def __init__(self, config: FilterConfig | None = None, language_pair: LanguagePair | None = None):
        self.config = config
        self.language_pair = language_pair

    def fit(self, X, y=None):
        self.config_ = self.config or FilterConfig()
        return self

    def transform(self, X):
        from .validation import check_corpus

        cfg = getattr(self, "config_", None) or self.config or FilterConfig()
        kwargs = {}
        lp = self.language_pair
        if lp is not None:
            kwargs = dict(
                tokenizer=(lp.source.tokenizer, lp.target.tokenizer),
                stopwords=(lp.source_stopwords, lp.target_stopwords),
                lemmatizers=(lp.source.lemmatizer, lp.target.lemmatizer),
            )
        out, self.report_ = run_filters(check_corpus(X), cfg, **kwargs)
        return out
