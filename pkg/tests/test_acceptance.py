"""Acceptance criteria, one test per criterion.

Each test records a ``[PASS]``/``[FAIL]`` line that the terminal summary
prints at the end of the run.
"""

import json
import random
import socket
import time
import urllib.request
from contextlib import contextmanager

import pytest

from lexmatcher.augment import LLMResponse, parse_and_validate
from lexmatcher.cli import run
from lexmatcher.config import PipelineConfig
from lexmatcher.corpus_io import SentencePair, write_corpus
from lexmatcher.filter import (
    FilterConfig,
    rule_content_words,
    rule_length,
    rule_quality,
    rule_ratio,
    rule_repeat,
    run_filters,
)
from lexmatcher.lexicon import Lexicon, dictionary_rows, make_sense
from lexmatcher.matcher import retrieve
from lexmatcher.pipeline import augment_stage
from lexmatcher.sft import BuildConfig, build_constrained
from lexmatcher.text import LanguagePair

from conftest import ACCEPTANCE_RESULTS
from oracles import brute_force_retrieve, brute_segments, is_contiguous_sub, random_fixture
from pipeline_fixture import write_fixture
from synthetic import STOPWORDS, synthetic_language_pair, zipf_corpus


@contextmanager
def criterion(label: str):
    detail = {}
    try:
        yield detail
    except BaseException as exc:
        ACCEPTANCE_RESULTS.append(f"[FAIL] {label}: {detail.get('msg', '')} {type(exc).__name__}: {exc}".rstrip())
        raise
    ACCEPTANCE_RESULTS.append(f"[PASS] {label}: {detail.get('msg', '')}".rstrip())


def fixture_lang():
    return LanguagePair.from_tag("en-zh", source_stopwords={"the", "of", "and", "a", "to", "in"},
                                 target_stopwords=set())


N_FIXTURES = 50


def test_ac1_oracle_equivalence():
    lang = fixture_lang()
    with criterion("AC1 oracle equivalence") as d:
        elapsed = 0.0
        runs = 0
        for seed in range(N_FIXTURES):
            corpus, lexicon = random_fixture(seed, lang, max_pairs=1000, max_entries=200)
            assert len(corpus) <= 1000 and len(lexicon) <= 200
            for k in (0, 1, 2, 3):
                t0 = time.perf_counter()
                subset, report, records = retrieve(corpus, lexicon, k, lang)
                elapsed += time.perf_counter() - t0
                want_subset, want_counts = brute_force_retrieve(corpus, lexicon, k, lang)
                assert [p.index for p in subset] == want_subset, f"seed {seed} k {k}: subset differs"
                assert {e.identity: report.counts[e] for e in lexicon} == want_counts, f"seed {seed} k {k}: counts"
                want_covered = [e.identity for e in lexicon if want_counts[e.identity] >= 1]
                want_uncovered = [e.identity for e in lexicon if want_counts[e.identity] == 0]
                assert [e.identity for e in report.covered] == want_covered
                assert [e.identity for e in report.uncovered] == want_uncovered
                hist = {}
                for c in want_counts.values():
                    hist[c] = hist.get(c, 0) + 1
                assert report.histogram == dict(sorted(hist.items()))
                assert report.subset_size == len(want_subset)
                assert [r.pair_index for r in records] == want_subset
                runs += 1
        d["msg"] = f"{N_FIXTURES} fixtures x 4 K values = {runs} runs; retrieve total {elapsed:.2f}s (< 10s)"
        assert elapsed < 10.0


# The random fixtures use a tiny vocabulary and targets without stopwords,
# so the default thresholds reject nearly every pair. The filtered variant
# loosens the repeat and content bands enough for a sizeable share to pass.
FIXTURE_FILTER = FilterConfig(max_repeat_ratio=0.6, content_word_hi=1)


def _grounded_senses(corpus, lexicon, lang):
    max_len = max((len(e.source_segment) for e in lexicon), default=0)
    analysed = [
        (set(brute_segments(lang.source.lemmas(p.source_text), lang.source_stopwords, max_len)),
         lang.target.lemmas(p.target_text))
        for p in corpus
    ]
    return [e for e in lexicon
            if any(e.source_segment in segs and is_contiguous_sub(y, e.target_segment) for segs, y in analysed)]


def test_ac2_coverage_guarantee():
    lang = fixture_lang()
    with criterion("AC2 coverage guarantee") as d:
        checked = violations = kept = total = 0
        for seed in range(N_FIXTURES):
            raw, lexicon = random_fixture(seed, lang, max_pairs=1000, max_entries=200)
            filtered, _ = run_filters(raw, FIXTURE_FILTER, stopwords=(lang.source_stopwords, lang.target_stopwords),
                                      tokenizer=(lang.source.tokenizer, lang.target.tokenizer),
                                      lemmatizers=(lang.source.lemmatizer, lang.target.lemmatizer))
            kept += len(filtered)
            total += len(raw)
            for corpus in (filtered, raw):
                grounded = _grounded_senses(corpus, lexicon, lang)
                for k in (1, 2, 3):
                    _, report, _ = retrieve(corpus, lexicon, k, lang)
                    violations += sum(report.counts[e] < 1 for e in grounded)
                    checked += len(grounded)
        d["msg"] = (f"{checked} grounded (sense, K) checks over filtered ({kept}/{total} pairs kept) and raw "
                    f"fixtures, {violations} violations")
        assert kept > 0 and checked > 0 and violations == 0


def _words(n):
    return " ".join(f"w{i}" for i in range(n))


def test_ac3_filter_golden_suite():
    cfg = FilterConfig()
    stop = (frozenset({"the", "of", "a", "is"}), frozenset({"the", "of", "a", "is"}))

    def p(src, tgt, score=None):
        return SentencePair(0, src, tgt, score)

    cases = [
        ("length 100 words kept", rule_length(p(_words(100), _words(100)), cfg), True),
        ("length 101 words rejected", rule_length(p(_words(101), _words(100)), cfg), False),
        ("word of 40 chars kept", rule_length(p("x" * 40, "y"), cfg), True),
        ("word of 41 chars rejected", rule_length(p("x" * 41, "y"), cfg), False),
        ("ratio exactly 1/3 kept", rule_ratio(p(_words(10), _words(30)), cfg), True),
        ("ratio 10/31 rejected", rule_ratio(p(_words(10), _words(31)), cfg), False),
        ("ratio exactly 3 kept", rule_ratio(p(_words(9), _words(3)), cfg), True),
        ("ratio 3.5 rejected", rule_ratio(p(_words(7), _words(2)), cfg), False),
        ("repeat ratio 0.3 kept", rule_repeat(p("a a a b c d e f g h", _words(10)), cfg), True),
        ("repeat ratio 0.4 rejected", rule_repeat(p("a a a a b c d e f g", _words(10)), cfg), False),
        ("repeat ratio 0.75 rejected", rule_repeat(p("a a a b", _words(4)), cfg), False),
        ("content share 0.3 kept", rule_content_words(p("x y z the of a the of a is", "x y z the of a the of a is"),
                                                      cfg, stopwords=stop), True),
        ("content share 0.2 rejected", rule_content_words(p("x y the of a the of a is is", "x y z the of a the of a is"),
                                                          cfg, stopwords=stop), False),
        ("content share 0.8 kept", rule_content_words(p("b c d e f g h i the of", "b c d e f g h i the of"),
                                                      cfg, stopwords=stop), True),
        ("content share 0.9 rejected", rule_content_words(p("b c d e f g h i j the", "b c d e f g h i the of"),
                                                          cfg, stopwords=stop), False),
        ("content share 0 rejected", rule_content_words(p("the of a", "the of a"), cfg, stopwords=stop), False),
        ("score 0.40 kept", rule_quality(p("a", "b", 0.40), cfg), True),
        ("score 0.39 rejected", rule_quality(p("a", "b", 0.39), cfg), False),
    ]
    with criterion("AC3 filter golden suite") as d:
        wrong = [name for name, decision, want in cases if bool(decision) != want]
        d["msg"] = f"{len(cases) - len(wrong)}/{len(cases)} boundary fixtures as specified"
        assert not wrong, wrong


def test_ac4_constraint_template_contract():
    lang = synthetic_language_pair()
    corpus, lexicon, _ = zipf_corpus(12_500, 3000, 4, lang, n_bigrams=500)
    subset, _, records = retrieve(corpus, lexicon, 1_000_000, lang)
    # keep exactly 12,000 eligible pairs
    subset, records = subset.with_pairs(list(subset)[:12_000]), records[:12_000]
    with criterion("AC4 constraint-template contract") as d:
        assert len(subset) == 12_000 and all(r.matched for r in records)
        samples = build_constrained(subset, records, BuildConfig(rng_seed=42), lang)
        assert len(samples) == 10_000
        lengths = [len(s.constraints) for s in samples]
        assert min(lengths) >= 1 and max(lengths) <= 3
        bad = 0
        total = 0
        for s in samples:
            x, y = lang.source.lemmas(s.input), lang.target.lemmas(s.output)
            for src, tgt in s.constraints:
                total += 1
                clause = f'"{src}" means "{tgt}".'
                if not (is_contiguous_sub(x, lang.source.lemmas(src)) and is_contiguous_sub(y, lang.target.lemmas(tgt))
                        and clause in s.instruction):
                    bad += 1
        d["msg"] = (f"{len(samples)} samples from 12000 eligible; constraints per sample in "
                    f"[{min(lengths)}, {max(lengths)}]; {total - bad}/{total} pass containment")
        assert bad == 0


def _write_synthetic_inputs(d):
    lang = synthetic_language_pair()
    corpus, lexicon, _ = zipf_corpus(3000, 1500, 11, lang, n_bigrams=200)
    d.mkdir(parents=True, exist_ok=True)
    write_corpus(corpus, d / "c.en", d / "c.zh")
    (d / "c.qe").write_text("".join(f"{round(p.quality_score * 100, 1)}\n" for p in corpus), encoding="utf-8")
    (d / "dict.tsv").write_text("".join(r + "\n" for r in dictionary_rows(lexicon)), encoding="utf-8")
    (d / "stop.en").write_text("\n".join(STOPWORDS) + "\n", encoding="utf-8")
    (d / "stop.zh").write_text("", encoding="utf-8")
    (d / "config.toml").write_text(
        'langs = "en-zh"\nseed = 42\n\n'
        '[paths]\nsrc = "c.en"\ntgt = "c.zh"\nscores = "c.qe"\ndict = "dict.tsv"\n'
        'source_stopwords = "stop.en"\ntarget_stopwords = "stop.zh"\n\n'
        '[filter]\nscore_scale = "percent"\ncontent_word_hi = 1.0\n\n'
        '[match]\nk = 2\n\n[sft]\ndirections = ["en-zh", "zh-en"]\n\n[stats]\nks = [1, 2, 3]\n',
        encoding="utf-8",
    )
    return d


ARTIFACTS = [
    "05_sft/train.jsonl", "02_match/coverage.json",
    "06_stats/sizes.csv", "06_stats/freq_subset.csv", "06_stats/freq_random.csv", "06_stats/rank_logfreq.csv",
]


def test_ac5_determinism(tmp_path):
    inputs = {"fixture": write_fixture(tmp_path / "fixture"), "synthetic": _write_synthetic_inputs(tmp_path / "syn")}
    with criterion("AC5 determinism") as d:
        compared = 0
        for name, data in inputs.items():
            outs = []
            for i, threads in enumerate(("1", "2")):
                out = tmp_path / f"{name}_run{i}"
                code = run(["pipeline", "--config", str(data / "config.toml"), "--seed", "42",
                            "--threads", threads, "--out-dir", str(out)])
                assert code == 0
                outs.append(out)
            for rel in ARTIFACTS:
                a, b = (o / rel for o in outs)
                assert a.read_bytes() == b.read_bytes(), f"{name}: {rel} differs"
                compared += 1
            assert (outs[0] / "05_sft" / "train.jsonl").stat().st_size > 0
        d["msg"] = f"{compared} artifacts byte-identical across two seed-42 runs (2 datasets)"


def test_ac6_frequency_tendency():
    lang = synthetic_language_pair()
    with criterion("AC6 frequency-distribution tendency") as d:
        wins = 0
        ratios = []
        for seed in range(50):
            corpus, lexicon, _ = zipf_corpus(6000, 3000, 1000 + seed, lang)
            subset, _, _ = retrieve(corpus, lexicon, 2, lang)
            baseline = random.Random(seed).sample(list(corpus), len(subset))

            def types(pairs):
                return len({lemma for p in pairs for lemma in lang.source.lemmas(p.source_text)})

            a, b = types(subset), types(baseline)
            wins += a >= b
            ratios.append(a / b)
        d["msg"] = f"{wins}/50 trials with selected >= random unique types (mean ratio {sum(ratios) / 50:.3f})"
        assert wins >= 45


@pytest.mark.slow
def test_ac7_throughput():
    lang = synthetic_language_pair()
    corpus, lexicon, _ = zipf_corpus(1_000_000, 45_000, 7, lang, n_bigrams=5_500)
    with criterion("AC7 throughput") as d:
        assert len(corpus) == 1_000_000 and len(lexicon) >= 50_000
        t0 = time.perf_counter()
        subset, report, _ = retrieve(corpus, lexicon, 3, lang)
        elapsed = time.perf_counter() - t0
        d["msg"] = (f"1,000,000 pairs x {len(lexicon)} entries matched in {elapsed:.1f}s on this machine "
                    f"(limit 300s); {len(subset)} selected")
        assert elapsed < 300


class _NetworkUsed(AssertionError):
    pass


def test_ac8_augmentation_round_trip(tmp_path, monkeypatch):
    calls = []

    def forbid(*args, **kwargs):
        calls.append(args)
        raise _NetworkUsed("network access attempted")

    monkeypatch.setattr(urllib.request, "urlopen", forbid)
    monkeypatch.setattr(socket.socket, "connect", forbid)
    monkeypatch.setattr(socket, "create_connection", forbid)

    lang = LanguagePair.from_tag("en-zh")
    senses = [make_sense("bank", t, f"bank.n.0{i}", lang, "noun", gloss) for i, (t, gloss) in enumerate([
        ("银行", "a financial institution"), ("河岸", "sloping land beside water"),
        ("库", "a supply held in reserve"), ("排", "a row of similar objects"),
        ("储蓄罐", "a container for keeping money at home"),
    ], 1)]
    gaps = tmp_path / "gaps.tsv"
    gaps.write_text("".join(r + "\n" for r in dictionary_rows(Lexicon(senses))), encoding="utf-8")
    well_formed = {
        "bank.n.01": "Source: She works at a bank.\nTarget: 她 在 一 家 银行 工作。",
        "bank.n.02": "Sure!\nSOURCE: They fished from the bank.\ntarget: 他们 在 河岸 上 钓鱼。\nEnjoy.",
    }
    malformed = {
        "bank.n.03": ("Source: The blood bank is open.\nTarget: 血液 中心 开放 了。", "target segment absent"),
        "bank.n.04": ("Source: A row of lamps.\nTarget: 一 排 灯。", "source segment absent"),
        "bank.n.05": ("I am not able to do that.", "Source line absent"),
    }
    responses = tmp_path / "responses.jsonl"
    with open(responses, "w", encoding="utf-8") as fh:
        for i, s in enumerate(senses):
            text = well_formed.get(s.sense_id) or malformed[s.sense_id][0]
            fh.write(json.dumps({"index": i, "sense_id": s.sense_id, "response": text}, ensure_ascii=False) + "\n")

    cfg = PipelineConfig()
    with criterion("AC8 augmentation round-trip") as d:
        stage = augment_stage(cfg, str(gaps), tmp_path / "aug", str(responses))
        assert stage.run() == "done"
        prompts = (tmp_path / "aug" / "prompts.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(prompts) == len(senses)
        out = [json.loads(x) for x in (tmp_path / "aug" / "augmented.jsonl").read_text(encoding="utf-8").splitlines()]
        by_id = {o["sense_id"]: o for o in out}
        assert all(by_id[k]["valid"] for k in well_formed)
        assert all(not by_id[k]["valid"] and by_id[k]["reason"] == reason for k, (_, reason) in malformed.items())
        # ingesting the written responses equals parsing them directly
        direct = parse_and_validate(
            [LLMResponse(s.sense_id, well_formed.get(s.sense_id) or malformed[s.sense_id][0]) for s in senses],
            senses, lang)
        assert [g.to_dict() for g in direct] == out
        assert calls == []
        d["msg"] = (f"{len(well_formed)}/{len(well_formed)} well-formed valid, {len(malformed)}/{len(malformed)} "
                    f"malformed flagged with reasons, {len(calls)} network calls")
