"""Pipeline stages with digest manifests for resumable, deterministic runs."""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .augment import (
    call_llm,
    parse_and_validate,
    read_augmented,
    read_responses,
    render_prompts,
    write_augmented,
    write_responses,
)
from .config import PipelineConfig
from .corpus_io import SentencePair, attach_scores, load_corpus, write_corpus, write_scores
from .filter import run_filters
from .lexicon import Lexicon, dictionary_rows, load_dictionary, merge_entities
from .matcher import CoverageReport, coverage_gaps, read_matches, retrieve, write_matches
from .sft import build_dataset, emit_dataset
from .stats import compare_profiles, frequency_profile, subset_size_table

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class Stage:
    name: str
    inputs: dict[str, str | None]
    outputs: dict[str, Path]
    manifest: Path
    config_digest: str
    action: Callable[[], None] = field(repr=False)

    def missing_inputs(self) -> list[str]:
        return [p for p in self.inputs.values() if p is not None and not Path(p).is_file()]

    def _input_digests(self) -> dict[str, str | None]:
        return {k: (file_digest(p) if p is not None else None) for k, p in sorted(self.inputs.items())}

    def is_up_to_date(self) -> bool:
        if not self.manifest.is_file():
            return False
        try:
            m = json.loads(self.manifest.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            return False
        if m.get("status") != "complete" or m.get("config") != self.config_digest:
            return False
        if m.get("inputs") != self._input_digests():
            return False
        recorded = m.get("outputs", {})
        for key, path in self.outputs.items():
            if not path.is_file() or recorded.get(key) != file_digest(path):
                return False
        return True

    def run(self, force: bool = False) -> str:
        missing = self.missing_inputs()
        if missing:
            raise StageError(self.name, f"missing input file: {missing[0]}")
        if not force and self.is_up_to_date():
            logger.info("[%s] up-to-date", self.name)
            return "up-to-date"
        for path in self.outputs.values():
            path.parent.mkdir(parents=True, exist_ok=True)
        if self.manifest.exists():
            self.manifest.unlink()
        logger.info("[%s] running", self.name)
        try:
            self.action()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(self.name, f"{type(exc).__name__}: {exc}") from exc
        manifest = {
            "version": MANIFEST_VERSION,
            "stage": self.name,
            "status": "complete",
            "config": self.config_digest,
            "inputs": self._input_digests(),
            "outputs": {k: file_digest(p) for k, p in sorted(self.outputs.items())},
        }
        self.manifest.parent.mkdir(parents=True, exist_ok=True)
        self.manifest.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info("[%s] done", self.name)
        return "done"


def load_lexicon(cfg: PipelineConfig, dict_path: str, entities_path: str | None, lang) -> Lexicon:
    lexicon = load_dictionary(dict_path, lang, cfg.match.max_segment_len)
    if entities_path:
        lexicon = merge_entities(lexicon, entities_path, lang)
    return lexicon


def _read_lemma_sidecar(path: str | None) -> list[list[str]] | None:
    if path is None:
        return None
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh]


def _load_scored(cfg: PipelineConfig, src: str, tgt: str, scores: str | None, scale: str):
    corpus = load_corpus(src, tgt, cfg.langs)
    if scores:
        corpus = attach_scores(corpus, scores, scale)
    return corpus


def filter_stage(cfg: PipelineConfig, src: str, tgt: str, scores: str | None, out_prefix: str | Path,
                 source_lemmas: str | None = None, target_lemmas: str | None = None) -> Stage:
    prefix = Path(out_prefix)
    outputs = {
        "src": prefix.with_name(prefix.name + ".src"),
        "tgt": prefix.with_name(prefix.name + ".tgt"),
        "scores": prefix.with_name(prefix.name + ".scores"),
        "report": prefix.with_name(prefix.name + ".report.json"),
    }
    sidecars = {"source_lemmas": source_lemmas, "target_lemmas": target_lemmas}
    for key, path in sidecars.items():
        if path is not None:
            outputs[key] = prefix.with_name(prefix.name + "." + key)

    def action():
        lang = cfg.language_pair()
        corpus = _load_scored(cfg, src, tgt, scores, cfg.filter.score_scale)
        kept, report = run_filters(
            corpus, cfg.filter.options,
            tokenizer=(lang.source.tokenizer, lang.target.tokenizer),
            stopwords=(lang.source_stopwords, lang.target_stopwords),
            lemmatizers=(lang.source.lemmatizer, lang.target.lemmatizer),
        )
        write_corpus(kept, outputs["src"], outputs["tgt"])
        write_scores(kept, outputs["scores"])
        report.to_json(outputs["report"])
        # sidecars follow raw line numbers, so carry them over for the kept lines
        for key, path in sidecars.items():
            if path is not None:
                lines = Path(path).read_text(encoding="utf-8").split("\n")
                outputs[key].write_text("".join(lines[p.index] + "\n" for p in kept), encoding="utf-8")
        logger.info("[filter] kept %d of %d pairs", report.output_size, report.input_size)

    inputs = {"src": src, "tgt": tgt, "scores": scores, **sidecars,
              "source_stopwords": cfg.paths.source_stopwords, "target_stopwords": cfg.paths.target_stopwords,
              "lemma_exceptions": cfg.paths.lemma_exceptions}
    return Stage("filter", inputs, outputs,
                 prefix.with_name(prefix.name + ".manifest.json"), cfg.section_digest("filter"), action)


def match_stage(cfg: PipelineConfig, src: str, tgt: str, scores: str | None, score_scale: str, dict_path: str,
                entities: str | None, out_dir: str | Path, source_lemmas: str | None = None,
                target_lemmas: str | None = None) -> Stage:
    out = Path(out_dir)
    outputs = {
        "subset_src": out / "subset.src",
        "subset_tgt": out / "subset.tgt",
        "coverage": out / "coverage.json",
        "matches": out / "matches.jsonl",
    }

    def action():
        lang = cfg.language_pair()
        corpus = _load_scored(cfg, src, tgt, scores, score_scale)
        lexicon = load_lexicon(cfg, dict_path, entities, lang)
        subset, report, records = retrieve(
            corpus, lexicon, cfg.match.k, lang, rank=cfg.match.rank, n_jobs=cfg.threads,
            source_lemmas=_read_lemma_sidecar(source_lemmas), target_lemmas=_read_lemma_sidecar(target_lemmas),
        )
        write_corpus(subset, outputs["subset_src"], outputs["subset_tgt"])
        report.to_json(outputs["coverage"])
        write_matches(records, outputs["matches"])
        logger.info("[match] selected %d of %d pairs; %d/%d senses covered", len(subset), len(corpus),
                    len(report.covered), len(lexicon))

    inputs = {"src": src, "tgt": tgt, "scores": scores, "dict": dict_path, "entities": entities,
              "source_lemmas": source_lemmas, "target_lemmas": target_lemmas,
              "source_stopwords": cfg.paths.source_stopwords, "target_stopwords": cfg.paths.target_stopwords,
              "lemma_exceptions": cfg.paths.lemma_exceptions}
    digest = cfg.section_digest("match") + score_scale
    return Stage("match", inputs, outputs, out / "manifest.json", digest, action)


def gaps_stage(cfg: PipelineConfig, dict_path: str, entities: str | None, coverage: str, out_path: str | Path) -> Stage:
    out = Path(out_path)

    def action():
        lang = cfg.language_pair()
        lexicon = load_lexicon(cfg, dict_path, entities, lang)
        report = CoverageReport.from_json(coverage, lexicon)
        gaps = coverage_gaps(report, lexicon)
        rows = dictionary_rows(Lexicon(gaps, lexicon.max_segment_len))
        out.write_text("".join(r + "\n" for r in rows), encoding="utf-8")
        logger.info("[gaps] %d uncovered polysemous senses", len(gaps))

    inputs = {"dict": dict_path, "entities": entities, "coverage": coverage,
              "source_stopwords": cfg.paths.source_stopwords, "lemma_exceptions": cfg.paths.lemma_exceptions}
    return Stage("gaps", inputs, {"gaps": out}, out.with_name(out.name + ".manifest.json"),
                 cfg.section_digest("match"), action)


def augment_stage(cfg: PipelineConfig, gaps_path: str, out_dir: str | Path, responses: str | None = None) -> Stage:
    out = Path(out_dir)
    outputs = {"prompts": out / "prompts.jsonl", "augmented": out / "augmented.jsonl"}
    if cfg.augment.online:
        outputs["responses"] = out / "responses.jsonl"

    def action():
        lang = cfg.language_pair()
        gaps = list(load_dictionary(gaps_path, lang, cfg.match.max_segment_len).entries)
        prompts = render_prompts(gaps, cfg.augment.template, cfg.langs)
        endpoint = cfg.augment.endpoint()
        if endpoint.offline:
            got = call_llm(prompts, endpoint, prompts_path=outputs["prompts"])
            if responses:
                got = read_responses(responses, prompts)
        else:
            from .augment import write_prompts

            write_prompts(prompts, outputs["prompts"])
            got = call_llm(prompts, endpoint)
        generated = parse_and_validate(got, gaps, lang)
        if not endpoint.offline and cfg.augment.retry_invalid:
            retry = [i for i, g in enumerate(generated) if not g.valid]
            if retry:
                again = call_llm([prompts[i] for i in retry], endpoint)
                fixed = parse_and_validate(again, [gaps[i] for i in retry], lang)
                for i, resp, g in zip(retry, again, fixed):
                    if g.valid:
                        generated[i], got[i] = g, resp
        if not endpoint.offline:
            write_responses(got, outputs["responses"])
        write_augmented(generated, outputs["augmented"])
        logger.info("[augment] %d prompts, %d valid pairs", len(prompts), sum(g.valid for g in generated))

    inputs = {"gaps": gaps_path, "responses": responses, "template": cfg.augment.template}
    return Stage("augment", inputs, outputs, out / "manifest.json", cfg.section_digest("augment"), action)


def sft_stage(cfg: PipelineConfig, subset_dir: str | Path, augmented: str | None, out_path: str | Path) -> Stage:
    subset_dir = Path(subset_dir)
    out = Path(out_path)
    src, tgt, matches = (str(subset_dir / n) for n in ("subset.src", "subset.tgt", "matches.jsonl"))

    def action():
        lang = cfg.language_pair()
        corpus = load_corpus(src, tgt, cfg.langs)
        records = read_matches(matches)
        if len(records) != len(corpus):
            raise ValueError(f"{matches} has {len(records)} records for {len(corpus)} subset pairs")
        # restore the match-time indices so records line up with their pairs
        corpus = corpus.with_pairs(
            SentencePair(r.pair_index, p.source_text, p.target_text) for p, r in zip(corpus, records)
        )
        extra = read_augmented(augmented) if augmented else []
        samples = build_dataset(corpus, records, extra, cfg.sft.build_config(cfg.seed), lang, cfg.sft.directions)
        emit_dataset(samples, out, cfg.seed)
        logger.info("[build-sft] wrote %d samples", len(samples))

    inputs = {"subset_src": src, "subset_tgt": tgt, "matches": matches, "augmented": augmented}
    return Stage("build-sft", inputs, {"train": out}, out.with_name(out.name + ".manifest.json"),
                 cfg.section_digest("sft"), action)


def stats_stage(cfg: PipelineConfig, src: str, tgt: str, scores: str | None, score_scale: str, dict_path: str,
                entities: str | None, subset_dir: str | Path | None, out_dir: str | Path) -> Stage:
    out = Path(out_dir)
    outputs = {"sizes": out / "sizes.csv"}
    if subset_dir is not None:
        outputs.update(freq_subset=out / "freq_subset.csv", freq_random=out / "freq_random.csv",
                       rank_logfreq=out / "rank_logfreq.csv", compare=out / "compare.json")

    def action():
        lang = cfg.language_pair()
        corpus = _load_scored(cfg, src, tgt, scores, score_scale)
        lexicon = load_lexicon(cfg, dict_path, entities, lang)
        table = subset_size_table(corpus, lexicon, sorted(cfg.stats.ks), lang, cfg.match.rank, cfg.threads)
        table.to_csv(outputs["sizes"])
        if subset_dir is None:
            return
        subset_src = Path(subset_dir) / "subset.src"
        with open(subset_src, encoding="utf-8") as fh:
            chosen = [line.rstrip("\n") for line in fh]
        rng = random.Random(f"{cfg.seed}:stats:random")
        pool = [p.source_text for p in corpus]
        baseline = rng.sample(pool, min(len(chosen), len(pool)))
        a = frequency_profile(chosen, lang.source.lemmas)
        b = frequency_profile(baseline, lang.source.lemmas)
        a.to_csv(outputs["freq_subset"])
        b.to_csv(outputs["freq_random"])
        comparison = compare_profiles(a, b, outputs["rank_logfreq"], cfg.stats.top)
        outputs["compare"].write_text(json.dumps(comparison.to_dict(), indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")

    inputs = {"src": src, "tgt": tgt, "scores": scores, "dict": dict_path, "entities": entities,
              "subset_src": str(Path(subset_dir) / "subset.src") if subset_dir is not None else None}
    return Stage("stats", inputs, outputs, out / "manifest.json",
                 cfg.section_digest("stats", "match") + score_scale, action)


def pipeline_stages(cfg: PipelineConfig, out_dir: str | Path) -> list[Stage]:
    """filter -> match -> gaps -> augment -> build-sft -> stats under ``out_dir``."""
    p = cfg.paths
    out = Path(out_dir)
    filtered = out / "01_filter" / "filtered"
    fsrc, ftgt, fscores = (str(filtered.with_name("filtered" + ext)) for ext in (".src", ".tgt", ".scores"))
    match_dir = out / "02_match"
    gaps = out / "03_gaps" / "gaps.tsv"
    aug_dir = out / "04_augment"
    train = out / "05_sft" / "train.jsonl"
    stats_dir = out / "06_stats"
    scores_out = fscores if p.scores else None
    src_lem = str(filtered.with_name("filtered.source_lemmas")) if p.source_lemmas else None
    tgt_lem = str(filtered.with_name("filtered.target_lemmas")) if p.target_lemmas else None
    return [
        filter_stage(cfg, p.src, p.tgt, p.scores, filtered, p.source_lemmas, p.target_lemmas),
        match_stage(cfg, fsrc, ftgt, scores_out, "unit", p.dict, p.entities, match_dir, src_lem, tgt_lem),
        gaps_stage(cfg, p.dict, p.entities, str(match_dir / "coverage.json"), gaps),
        augment_stage(cfg, str(gaps), aug_dir, cfg.augment.responses),
        sft_stage(cfg, match_dir, str(aug_dir / "augmented.jsonl"), train),
        stats_stage(cfg, fsrc, ftgt, scores_out, "unit", p.dict, p.entities, match_dir, stats_dir),
    ]


def check_pipeline_paths(cfg: PipelineConfig) -> None:
    p = cfg.paths
    for name in ("src", "tgt", "dict"):
        if getattr(p, name) is None:
            raise StageError("pipeline", f"config key 'paths.{name}' is required")
    optional = ["scores", "entities", "source_stopwords", "target_stopwords", "lemma_exceptions",
                "source_lemmas", "target_lemmas"]
    for name in ("src", "tgt", "dict", *optional):
        value = getattr(p, name)
        if value is not None and not Path(value).is_file():
            raise StageError("pipeline", f"missing input file for 'paths.{name}': {value}")
    for section, name in (("augment", "template"), ("augment", "responses")):
        value = getattr(getattr(cfg, section), name)
        if value is not None and not Path(value).is_file():
            raise StageError("pipeline", f"missing input file for '{section}.{name}': {value}")


def run_pipeline(cfg: PipelineConfig, out_dir: str | Path, force: bool = False) -> dict[str, str]:
    check_pipeline_paths(cfg)
    statuses = {}
    for stage in pipeline_stages(cfg, out_dir):
        statuses[stage.name] = stage.run(force)
    return statuses
