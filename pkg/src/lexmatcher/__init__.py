"""Dictionary-pivoted curation of parallel data for translation instruction tuning."""

from .corpus_io import Corpus, Deduplicator, SentencePair, attach_scores, deduplicate, load_corpus
from .filter import CorpusFilter, FilterConfig, FilterReport, run_filters
from .lexicon import Lexicon, SensePair, candidate_segments, load_dictionary, lookup, merge_entities
from .matcher import CountTable, CoverageReport, LexMatcher, MatchRecord, coverage_gaps, rank_corpus, retrieve
from .text import Analyzer, LanguagePair, Lemmatizer, Tokenizer

__version__ = "0.1.0"

__all__ = [
    "Analyzer", "Corpus", "CorpusFilter", "CountTable", "CoverageReport", "Deduplicator", "FilterConfig",
    "FilterReport", "LanguagePair", "Lemmatizer", "LexMatcher", "Lexicon", "MatchRecord", "SensePair",
    "SentencePair", "Tokenizer", "attach_scores", "candidate_segments", "coverage_gaps", "deduplicate",
    "load_corpus", "load_dictionary", "lookup", "merge_entities", "rank_corpus", "retrieve", "run_filters",
]
