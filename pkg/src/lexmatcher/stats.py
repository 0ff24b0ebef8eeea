"""Word-frequency profiles and subset-size tables, written as CSV."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .corpus_io import Corpus
from .lexicon import Lexicon
from .matcher import retrieve
from .text import LanguagePair, Tokenizer


@dataclass(frozen=True)
class FrequencyProfile:
    table: tuple[tuple[int, str, int], ...]
    unique_types: int
    total_tokens: int

    def head_mass(self, top: int = 100) -> float:
        if not self.total_tokens:
            return 0.0
        return sum(c for _, _, c in self.table[:top]) / self.total_tokens

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "token", "count"])
            w.writerows(self.table)


def frequency_profile(sentences: Iterable[str], tokenizer: Callable[[str], list[str]] | None = None) -> FrequencyProfile:
    """Rank tokens by count, ties broken lexicographically."""
    tokenizer = tokenizer or Tokenizer()
    counts: Counter = Counter()
    for s in sentences:
        counts.update(tokenizer(s))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    table = tuple((r, tok, c) for r, (tok, c) in enumerate(ranked, 1))
    return FrequencyProfile(table, len(counts), sum(counts.values()))


@dataclass(frozen=True)
class ProfileComparison:
    unique_types: tuple[int, int]
    total_tokens: tuple[int, int]
    head_mass: tuple[float, float]
    top: int

    def to_dict(self) -> dict:
        return {"unique_types": list(self.unique_types), "total_tokens": list(self.total_tokens),
                "head_mass": list(self.head_mass), "top": self.top}


def compare_profiles(a: FrequencyProfile, b: FrequencyProfile, csv_path: str | Path | None = None,
                     top: int = 100) -> ProfileComparison:
    """Summaries for two profiles; optionally a rank vs log10-frequency CSV for plotting."""
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "log10_freq_a", "log10_freq_b"])
            for r in range(1, max(len(a.table), len(b.table)) + 1):
                fa = f"{math.log10(a.table[r - 1][2]):.6f}" if r <= len(a.table) else ""
                fb = f"{math.log10(b.table[r - 1][2]):.6f}" if r <= len(b.table) else ""
                w.writerow([r, fa, fb])
    return ProfileComparison(
        (a.unique_types, b.unique_types),
        (a.total_tokens, b.total_tokens),
        (a.head_mass(top), b.head_mass(top)),
        top,
    )


@dataclass(frozen=True)
class SubsetSizeTable:
    raw_size: int
    rows: tuple[tuple[int, int], ...]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "subset_size"])
            w.writerow(["raw", self.raw_size])
            w.writerows(self.rows)


def subset_size_table(corpus: Corpus, lexicon: Lexicon, ks: Sequence[int], lang: LanguagePair | None = None,
                      rank: bool = True, n_jobs: int = 1) -> SubsetSizeTable:
    if list(ks) != sorted(ks):
        raise ValueError("ks must be sorted ascending")
    rows = tuple((k, len(retrieve(corpus, lexicon, k, lang, rank=rank, n_jobs=n_jobs)[0])) for k in ks)
    return SubsetSizeTable(len(corpus), rows)
