"""Dictionary-pivoted retrieval of a sense-balanced parallel subset.

The corpus is ranked by quality score and traversed once. A pair is kept
when at least one of its source segments has a dictionary translation that
also occurs in the target sentence and that sense has been matched fewer
than ``k`` times so far. Counts are a sequential fold over the ranked
corpus; only per-sentence lemmatization may run ahead in worker processes.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import islice
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .corpus_io import Corpus, SentencePair
from .lexicon import ENTITY, Lexicon, SensePair, candidate_segments
from .text import LanguagePair
from .validation import check_corpus, check_k

logger = logging.getLogger(__name__)

_SEP = "\x1f"  # str.split() treats it as whitespace, so no token contains it
GAP_POS = ("noun", "verb")
GAP_MIN_SENSES = 4


@dataclass
class CountTable:
    """Per-sense match counter capped at ``k``."""

    k: int
    counts: dict[SensePair, int] = field(default_factory=dict)

    def __getitem__(self, sense: SensePair) -> int:
        return self.counts.get(sense, 0)

    def can_take(self, sense: SensePair) -> bool:
        return self.counts.get(sense, 0) < self.k

    def increment(self, sense: SensePair) -> None:
        c = self.counts.get(sense, 0)
        if c >= self.k:
            raise ValueError(f"count for {sense.identity} already at cap {self.k}")
        self.counts[sense] = c + 1

    def total(self) -> int:
        return sum(self.counts.values())


class Match(NamedTuple):
    sense: SensePair
    position: int
    surface: str = ""


@dataclass
class MatchRecord:
    pair_index: int
    matched: list[Match] = field(default_factory=list)

    @property
    def selected(self) -> bool:
        return bool(self.matched)

    def to_dict(self) -> dict:
        return {
            "pair_index": self.pair_index,
            "selected": self.selected,
            "matched": [
                {
                    "sense_id": m.sense.sense_id,
                    "source_segment": m.sense.source_key,
                    "target_segment": m.sense.target_key,
                    "source_text": m.sense.source_text,
                    "target_text": m.sense.target_text,
                    "position": m.position,
                    "surface": m.surface,
                }
                for m in self.matched
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, lexicon: Lexicon | None = None) -> "MatchRecord":
        by_identity = {e.identity: e for e in lexicon.entries} if lexicon is not None else {}
        matched = []
        for m in data["matched"]:
            src, tgt = tuple(m["source_segment"].split(" ")), tuple(m["target_segment"].split(" "))
            sense = by_identity.get((m["source_segment"], m["target_segment"], m["sense_id"]))
            if sense is None:
                sense = SensePair(src, tgt, m["sense_id"], source_text=m.get("source_text", ""),
                                  target_text=m.get("target_text", ""))
            matched.append(Match(sense, m["position"], m.get("surface", "")))
        return cls(data["pair_index"], matched)


@dataclass
class CoverageReport:
    k: int
    covered: tuple[SensePair, ...]
    uncovered: tuple[SensePair, ...]
    histogram: dict[int, int]
    subset_size: int
    counts: CountTable | None = field(default=None, repr=False)

    @property
    def total_increments(self) -> int:
        return sum(c * n for c, n in self.histogram.items())

    def to_dict(self) -> dict:
        def triples(senses):
            return [[s.sense_id, s.source_key, s.target_key] for s in senses]

        return {
            "k": self.k,
            "subset_size": self.subset_size,
            "total_senses": len(self.covered) + len(self.uncovered),
            "covered_count": len(self.covered),
            "uncovered_count": len(self.uncovered),
            "histogram": [[c, n] for c, n in sorted(self.histogram.items())],
            "covered": triples(self.covered),
            "uncovered": triples(self.uncovered),
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path, lexicon: Lexicon) -> "CoverageReport":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        by_identity = {(e.sense_id, e.source_key, e.target_key): e for e in lexicon.entries}
        try:
            covered = tuple(by_identity[tuple(t)] for t in data["covered"])
            uncovered = tuple(by_identity[tuple(t)] for t in data["uncovered"])
        except KeyError as exc:
            raise ValueError(f"coverage report names a sense missing from the lexicon: {exc.args[0]}") from None
        return cls(data["k"], covered, uncovered, {c: n for c, n in data["histogram"]}, data["subset_size"])


def build_coverage(lexicon: Lexicon, table: CountTable, subset_size: int) -> CoverageReport:
    covered, uncovered = [], []
    hist: Counter = Counter()
    for e in lexicon.entries:
        c = table[e]
        hist[c] += 1
        (covered if c >= 1 else uncovered).append(e)
    return CoverageReport(table.k, tuple(covered), tuple(uncovered), dict(sorted(hist.items())), subset_size, table)


def rank_corpus(corpus: Corpus) -> Corpus:
    """Order by quality score, best first; ties and unscored pairs keep corpus order."""
    order = sorted(
        range(len(corpus)),
        key=lambda i: (corpus[i].quality_score is None,
                       -(corpus[i].quality_score or 0.0),
                       corpus[i].index),
    )
    return corpus.with_pairs(corpus[i] for i in order)


def _target_pattern(segment: Sequence[str]) -> str:
    return _SEP + _SEP.join(segment) + _SEP


def _padded(lemmas: Sequence[str]) -> str:
    return _SEP + _SEP.join(lemmas) + _SEP


def match_sentence(pair: SentencePair, lexicon: Lexicon, table: CountTable, lang: LanguagePair,
                   source_lemmas: Sequence[str] | None = None,
                   target_lemmas: Sequence[str] | None = None) -> MatchRecord:
    """Match one pair against the lexicon, updating ``table`` in place.

    Increments happen immediately, so a repeated segment can use up a sense
    within the same sentence.
    """
    src = list(source_lemmas) if source_lemmas is not None else lang.source.lemmas(pair.source_text)
    tgt = target_lemmas if target_lemmas is not None else lang.target.lemmas(pair.target_text)
    tgt_pad = _padded(tgt)
    record = MatchRecord(pair.index)
    max_len = min(lexicon.longest_source, lexicon.max_segment_len)
    for pos, key in candidate_segments(src, lang.source_stopwords, max_len):
        for sense in lexicon.lookup(key):
            if table.can_take(sense) and _target_pattern(sense.target_segment) in tgt_pad:
                table.increment(sense)
                record.matched.append(Match(sense, pos))
    if record.matched:
        _fill_surfaces(record, pair, lang, src)
    return record


def _fill_surfaces(record: MatchRecord, pair: SentencePair, lang: LanguagePair, src: Sequence[str]) -> None:
    lemmas, spans = lang.source.analyze(pair.source_text)
    usable = list(lemmas) == list(src)
    text = pair.source_text
    filled = []
    for m in record.matched:
        n = len(m.sense.source_segment)
        if usable:
            surface = text[spans[m.position][0] : spans[m.position + n - 1][1]]
        else:
            surface = m.sense.source_text
        filled.append(m._replace(surface=surface))
    record.matched = filled


class _CompiledLexicon:
    """Integer-keyed view of a lexicon for the retrieval hot loop."""

    def __init__(self, lexicon: Lexicon):
        ids = {e.identity: i for i, e in enumerate(lexicon.entries)}
        self.entries = lexicon.entries
        self.index = {
            key: tuple((ids[s.identity], _target_pattern(s.target_segment)) for s in senses)
            for key, senses in lexicon.index.items()
        }
        self.max_len = min(lexicon.longest_source, lexicon.max_segment_len)


def _analyze_batch(args):
    lang, texts = args
    return [(lang.source.lemmas(s), lang.target.lemmas(t)) for s, t in texts]


def _batched(it: Iterable, size: int) -> Iterator[list]:
    it = iter(it)
    while batch := list(islice(it, size)):
        yield batch


def _lemma_stream(pairs: Sequence[SentencePair], lang: LanguagePair, n_jobs: int,
                  source_lemmas, target_lemmas, batch_size: int = 4096):
    """Yield ``(source_lemmas, target_lemmas)`` per pair in order."""
    if source_lemmas is not None or target_lemmas is not None:
        for p in pairs:
            s = source_lemmas[p.index] if source_lemmas is not None else lang.source.lemmas(p.source_text)
            t = target_lemmas[p.index] if target_lemmas is not None else lang.target.lemmas(p.target_text)
            yield list(s), list(t)
        return
    if n_jobs <= 1:
        src_lem, tgt_lem = lang.source.lemmas, lang.target.lemmas
        for p in pairs:
            yield src_lem(p.source_text), tgt_lem(p.target_text)
        return
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        jobs = ((lang, [(p.source_text, p.target_text) for p in batch]) for batch in _batched(pairs, batch_size))
        for result in pool.map(_analyze_batch, jobs):
            yield from result


def retrieve(corpus: Corpus, lexicon: Lexicon, k: int, lang: LanguagePair | None = None, *,
             rank: bool = True, n_jobs: int = 1,
             source_lemmas: Sequence[Sequence[str]] | Mapping[int, Sequence[str]] | None = None,
             target_lemmas: Sequence[Sequence[str]] | Mapping[int, Sequence[str]] | None = None,
             log_every: int = 200_000) -> tuple[Corpus, CoverageReport, list[MatchRecord]]:
    """Select the subset of ``corpus`` that grounds dictionary senses.

    Returns the subset in traversal order, the coverage report (whose
    ``counts`` holds the final count table) and one :class:`MatchRecord` per
    selected pair, aligned with the subset. Lemma sidecars, when given, are
    looked up by ``pair.index`` and replace the built-in analyzers.
    """
    k = check_k(k)
    lang = lang or LanguagePair.from_tag(corpus.langs)
    ordered = rank_corpus(corpus) if rank else corpus
    compiled = _CompiledLexicon(lexicon)
    counts = [0] * len(compiled.entries)
    index, max_len, stop = compiled.index, compiled.max_len, lang.source_stopwords
    selected: list[SentencePair] = []
    records: list[MatchRecord] = []
    found_ids: list[list[tuple[int, int]]] = []
    lemma_cache: list[list[str]] = []

    if k > 0 and index:
        stream = _lemma_stream(ordered.pairs, lang, n_jobs, source_lemmas, target_lemmas)
        for n, (pair, (src, tgt)) in enumerate(zip(ordered.pairs, stream), 1):
            tgt_pad = None
            found = None
            for pos, key in candidate_segments(src, stop, max_len):
                senses = index.get(key)
                if senses is None:
                    continue
                if tgt_pad is None:
                    tgt_pad = _padded(tgt)
                for eid, pattern in senses:
                    if counts[eid] < k and pattern in tgt_pad:
                        counts[eid] += 1
                        if found is None:
                            found = []
                        found.append((eid, pos))
            if found is not None:
                selected.append(pair)
                found_ids.append(found)
                lemma_cache.append(src)
            if log_every and n % log_every == 0:
                logger.info("matched %d/%d pairs, %d selected", n, len(ordered), len(selected))

    entries = compiled.entries
    for pair, found, src in zip(selected, found_ids, lemma_cache):
        record = MatchRecord(pair.index, [Match(entries[eid], pos) for eid, pos in found])
        _fill_surfaces(record, pair, lang, src)
        records.append(record)

    table = CountTable(k, {entries[i]: c for i, c in enumerate(counts) if c})
    subset = ordered.with_pairs(selected)
    return subset, build_coverage(lexicon, table, len(subset)), records


def coverage_gaps(report: CoverageReport, lexicon: Lexicon) -> list[SensePair]:
    """Uncovered noun/verb senses of words with more than three senses."""
    groups = lexicon.sense_counts()
    gaps = [
        s for s in report.uncovered
        if s.origin != ENTITY and s.pos in GAP_POS and groups[(s.source_key, s.pos)] >= GAP_MIN_SENSES
    ]
    return sorted(gaps, key=lambda s: (s.source_key, s.sense_id, s.target_key))


def write_matches(records: Iterable[MatchRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")


def read_matches(path: str | Path, lexicon: Lexicon | None = None) -> list[MatchRecord]:
    with open(path, encoding="utf-8") as fh:
        return [MatchRecord.from_dict(json.loads(line), lexicon) for line in fh if line.strip()]


class LexMatcher(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`retrieve`.

    ``fit`` runs the retrieval over a corpus and stores the outcome;
    ``transform`` returns the selected pairs of its input, in traversal
    order, so ``fit_transform(corpus)`` yields the retrieved subset.

    Parameters
    ----------
    lexicon: Lexicon
        Sense pairs to ground.
    k: int, default 3
        Maximum number of pairs collected per sense.
    language_pair: LanguagePair or None
        Analyzers and stopwords; derived from the corpus language tags when None.
    rank: bool, default True
        Traverse by descending quality score instead of corpus order.
    n_jobs: int, default 1
        Worker processes for lemmatization prefetch.

    Attributes
    ----------
    subset_: Corpus
    coverage_: CoverageReport
    records_: list of MatchRecord
    counts_: CountTable
    """

    def __init__(self, lexicon: Lexicon | None = None, k: int = 3, language_pair: LanguagePair | None = None,
                 rank: bool = True, n_jobs: int = 1):
        self.lexicon = lexicon
        self.k = k
        self.language_pair = language_pair
        self.rank = rank
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        if self.lexicon is None:
            raise ValueError("LexMatcher needs a lexicon")
        corpus = check_corpus(X)
        self.subset_, self.coverage_, self.records_ = retrieve(
            corpus, self.lexicon, self.k, self.language_pair, rank=self.rank, n_jobs=self.n_jobs
        )
        self.counts_ = self.coverage_.counts
        self.selected_indices_ = [p.index for p in self.subset_]
        return self

    def transform(self, X):
        check_is_fitted(self, "selected_indices_")
        corpus = check_corpus(X)
        by_index = {p.index: p for p in corpus}
        return corpus.with_pairs(by_index[i] for i in self.selected_indices_ if i in by_index)

    def coverage_gaps(self) -> list[SensePair]:
        check_is_fitted(self, "coverage_")
        return coverage_gaps(self.coverage_, self.lexicon)
