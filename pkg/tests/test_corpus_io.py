import pytest
from hypothesis import given
from hypothesis import strategies as st

from lexmatcher.corpus_io import (
    AlignmentError,
    Corpus,
    Deduplicator,
    ScoreFileError,
    SentencePair,
    attach_scores,
    deduplicate,
    load_corpus,
    write_corpus,
)

from conftest import make_corpus


def _write(path, text: str):
    path.write_bytes(text.encode("utf-8"))
    return path


def test_load_two_lines(tmp_path):
    src = _write(tmp_path / "a.en", "hello\nworld\n")
    tgt = _write(tmp_path / "a.zh", "你好\n世界\n")
    corpus = load_corpus(src, tgt, "en-zh")
    assert [p.index for p in corpus] == [0, 1]
    assert corpus[1].target_text == "世界"
    assert corpus.langs == "en-zh"


def test_load_line_count_mismatch(tmp_path):
    src = _write(tmp_path / "a.en", "a\nb\nc\n")
    tgt = _write(tmp_path / "a.zh", "x\ny\n")
    with pytest.raises(AlignmentError, match="3 lines.*2"):
        load_corpus(src, tgt)


def test_load_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_corpus(tmp_path / "nope.en", tmp_path / "nope.zh")


def test_crlf_is_stripped(tmp_path):
    src = _write(tmp_path / "a.en", "one two\r\nthree\r\n")
    tgt = _write(tmp_path / "a.zh", "一二\r\n三\r\n")
    corpus = load_corpus(src, tgt)
    assert [p.source_text for p in corpus] == ["one two", "three"]
    assert [p.target_text.encode("utf-8") for p in corpus] == ["一二".encode(), "三".encode()]


def test_inner_carriage_return_does_not_split(tmp_path):
    src = _write(tmp_path / "a.en", "a\rb\n")
    tgt = _write(tmp_path / "a.zh", "x\n")
    assert load_corpus(src, tgt)[0].source_text == "a\rb"


def test_blank_lines_are_skipped_but_indices_kept(tmp_path):
    src = _write(tmp_path / "a.en", "a\n\nc\n")
    tgt = _write(tmp_path / "a.zh", "x\ny\nz\n")
    corpus = load_corpus(src, tgt)
    assert [p.index for p in corpus] == [0, 2]


_line = st.text(st.characters(blacklist_categories=("Cc", "Cs", "Zl", "Zp")), min_size=1).filter(str.strip)


@given(st.lists(st.tuples(_line, _line), max_size=20))
def test_write_then_load_round_trip(tmp_path_factory, rows):
    d = tmp_path_factory.mktemp("rt")
    corpus = make_corpus(rows)
    write_corpus(corpus, d / "a.src", d / "a.tgt")
    back = load_corpus(d / "a.src", d / "a.tgt")
    assert [(p.source_text, p.target_text) for p in back] == rows
    write_corpus(back, d / "b.src", d / "b.tgt")
    assert (d / "a.src").read_bytes() == (d / "b.src").read_bytes()


def test_attach_unit_scores(tmp_path):
    corpus = make_corpus([("a", "x"), ("b", "y")])
    out = attach_scores(corpus, _write(tmp_path / "s", "0.9\n0.2\n"), scale="unit")
    assert [p.quality_score for p in out] == [0.9, 0.2]


def test_attach_percent_scores(tmp_path):
    corpus = make_corpus([("a", "x"), ("b", "y")])
    out = attach_scores(corpus, _write(tmp_path / "s", "90\n20\n"), scale="percent")
    assert [p.quality_score for p in out] == [0.9, 0.2]


def test_attach_scores_count_mismatch(tmp_path):
    corpus = make_corpus([("a", "x"), ("b", "y")])
    with pytest.raises(ScoreFileError):
        attach_scores(corpus, _write(tmp_path / "s", "0.5\n"), scale="unit")


def test_attach_scores_bad_number_reports_line(tmp_path):
    corpus = make_corpus([("a", "x"), ("b", "y")])
    with pytest.raises(ScoreFileError, match=":2:"):
        attach_scores(corpus, _write(tmp_path / "s", "0.5\nabc\n"), scale="unit")


def test_attach_unit_scores_out_of_range(tmp_path):
    corpus = make_corpus([("a", "x")])
    with pytest.raises(ScoreFileError):
        attach_scores(corpus, _write(tmp_path / "s", "40\n"), scale="unit")


def test_dedup_examples():
    c = make_corpus([("a", "b"), ("a", "b"), ("c", "d")])
    assert [(p.source_text, p.target_text) for p in deduplicate(c)] == [("a", "b"), ("c", "d")]
    c = make_corpus([("a", "b"), ("a", "e")])
    assert len(deduplicate(c)) == 2
    c = make_corpus([("a  b", "x"), ("a b", "x")])
    assert [p.index for p in deduplicate(c)] == [0]


def test_dedup_keeps_case():
    c = make_corpus([("Apple", "x"), ("apple", "x")])
    assert len(deduplicate(c)) == 2


def test_dedup_source_mode():
    c = make_corpus([("a", "b"), ("a", "e")])
    assert len(deduplicate(c, mode="source")) == 1


_rows = st.lists(st.tuples(st.sampled_from(["a", "a ", "b", "a  b", "a b"]), st.sampled_from(["x", "y", " x"])),
                 max_size=30)


@given(_rows)
def test_dedup_idempotent_and_subsequence(rows):
    c = make_corpus(rows)
    once = deduplicate(c)
    assert deduplicate(once) == once
    it = iter(c.pairs)
    assert all(any(p is q for q in it) for p in once.pairs)


def test_sentence_pair_rejects_blank():
    with pytest.raises(ValueError):
        SentencePair(0, "  ", "x")


def test_deduplicator_transformer():
    rows = [("a", "b"), ("a", "b")]
    assert len(Deduplicator().fit_transform(rows)) == 1
    assert isinstance(Deduplicator().fit_transform(rows), Corpus)
