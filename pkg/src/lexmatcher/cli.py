"""Command-line entry point: ``lexmatcher <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, PipelineConfig
from .pipeline import (
    StageError,
    augment_stage,
    filter_stage,
    gaps_stage,
    match_stage,
    run_pipeline,
    sft_stage,
    stats_stage,
)

logger = logging.getLogger("lexmatcher")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file; flags override its values")
    common.add_argument("--seed", type=int, help="RNG seed (default: config value or 42)")
    common.add_argument("--threads", type=int, help="worker processes for lemmatization prefetch")
    common.add_argument("--langs", help="language pair tag such as en-zh")
    common.add_argument("--force", action="store_true", help="rerun even if the stage manifest is up to date")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def _scored(p: argparse.ArgumentParser) -> None:
    p.add_argument("--src", help="source-side corpus file")
    p.add_argument("--tgt", help="target-side corpus file")
    p.add_argument("--scores", help="quality scores, one per line")
    p.add_argument("--score-scale", choices=("unit", "percent"), help="scale of the scores file")


def _lexicon(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dict", help="dictionary TSV")
    p.add_argument("--entities", help="entity title TSV")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="lexmatcher",
        description="Select a sense-balanced parallel subset with a bilingual dictionary "
                    "and build instruction-tuning data from it.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", parents=[common], help="deduplicate and rule-filter a corpus")
    _scored(p)
    p.add_argument("--out-prefix", required=True, help="writes PREFIX.src/.tgt/.scores/.report.json")

    p = sub.add_parser("match", parents=[common], help="retrieve the dictionary-grounded subset")
    _scored(p)
    _lexicon(p)
    p.add_argument("--k", type=int, help="per-sense cap on collected pairs")
    p.add_argument("--no-rank", action="store_true", help="traverse in corpus order, ignoring scores")
    p.add_argument("--source-lemmas", help="pre-lemmatized source sidecar")
    p.add_argument("--target-lemmas", help="pre-lemmatized target sidecar")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("gaps", parents=[common], help="list uncovered polysemous senses")
    _lexicon(p)
    p.add_argument("--coverage", required=True, help="coverage.json from the match stage")
    p.add_argument("--out", required=True, help="gap senses as dictionary TSV")

    p = sub.add_parser("augment", parents=[common], help="prompt an LLM for demonstrations of gap senses")
    p.add_argument("--gaps", required=True, help="gap TSV from the gaps stage")
    p.add_argument("--template", help="prompt template with $placeholders")
    p.add_argument("--online", action="store_true", help="call the endpoint instead of writing prompts.jsonl")
    p.add_argument("--responses", help="responses.jsonl gathered offline")
    p.add_argument("--retry-invalid", action="store_true", help="re-query invalid generations once (online)")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("build-sft", parents=[common], help="write the instruction-tuning JSONL")
    p.add_argument("--subset-dir", required=True, help="output directory of the match stage")
    p.add_argument("--augmented", help="augmented.jsonl from the augment stage")
    p.add_argument("--directions", help="comma-separated directions, e.g. en-zh,zh-en")
    p.add_argument("--out", required=True)

    p = sub.add_parser("stats", parents=[common], help="subset sizes per K and frequency profiles")
    _scored(p)
    _lexicon(p)
    p.add_argument("--ks", help="comma-separated K values")
    p.add_argument("--subset-dir", help="match output to profile against a random subset")
    p.add_argument("--no-rank", action="store_true")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("pipeline", parents=[common], help="run every stage in order")
    p.add_argument("--out-dir", help="defaults to paths.out_dir from the config")
    return parser


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.langs is not None:
        cfg.langs = args.langs
    return cfg


def _pick(flag, fallback):
    return flag if flag is not None else fallback


def _require(stage: str, **values) -> None:
    for name, value in values.items():
        if value is None:
            raise StageError(stage, f"--{name.replace('_', '-')} is required (or set it in the config)")


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        cfg = _load_config(args)
        p = cfg.paths
        cmd = args.command
        if cmd == "filter":
            src, tgt = _pick(args.src, p.src), _pick(args.tgt, p.tgt)
            _require(cmd, src=src, tgt=tgt)
            if args.score_scale:
                cfg.filter.score_scale = args.score_scale
            stage = filter_stage(cfg, src, tgt, _pick(args.scores, p.scores), args.out_prefix)
        elif cmd == "match":
            src, tgt, dict_path = _pick(args.src, p.src), _pick(args.tgt, p.tgt), _pick(args.dict, p.dict)
            _require(cmd, src=src, tgt=tgt, dict=dict_path)
            if args.k is not None:
                cfg.match.k = args.k
            if args.no_rank:
                cfg.match.rank = False
            stage = match_stage(cfg, src, tgt, _pick(args.scores, p.scores),
                                _pick(args.score_scale, cfg.filter.score_scale), dict_path,
                                _pick(args.entities, p.entities), args.out_dir,
                                _pick(args.source_lemmas, p.source_lemmas), _pick(args.target_lemmas, p.target_lemmas))
        elif cmd == "gaps":
            dict_path = _pick(args.dict, p.dict)
            _require(cmd, dict=dict_path)
            stage = gaps_stage(cfg, dict_path, _pick(args.entities, p.entities), args.coverage, args.out)
        elif cmd == "augment":
            if args.template:
                cfg.augment.template = args.template
            if args.online:
                cfg.augment.online = True
            if args.retry_invalid:
                cfg.augment.retry_invalid = True
            stage = augment_stage(cfg, args.gaps, args.out_dir, _pick(args.responses, cfg.augment.responses))
        elif cmd == "build-sft":
            if args.directions:
                cfg.sft.directions = [d.strip() for d in args.directions.split(",") if d.strip()]
            stage = sft_stage(cfg, args.subset_dir, args.augmented, args.out)
        elif cmd == "stats":
            src, tgt, dict_path = _pick(args.src, p.src), _pick(args.tgt, p.tgt), _pick(args.dict, p.dict)
            _require(cmd, src=src, tgt=tgt, dict=dict_path)
            if args.ks:
                cfg.stats.ks = [int(k) for k in args.ks.split(",")]
            if args.no_rank:
                cfg.match.rank = False
            stage = stats_stage(cfg, src, tgt, _pick(args.scores, p.scores),
                                _pick(args.score_scale, cfg.filter.score_scale), dict_path,
                                _pick(args.entities, p.entities), args.subset_dir, args.out_dir)
        else:
            out_dir = _pick(args.out_dir, p.out_dir)
            _require("pipeline", out_dir=out_dir)
            statuses = run_pipeline(cfg, out_dir, force=args.force)
            for name, status in statuses.items():
                print(f"{name}: {status}", file=sys.stderr)
            if all(s == "up-to-date" for s in statuses.values()):
                print("pipeline: up-to-date", file=sys.stderr)
            return 0
        status = stage.run(force=args.force)
        print(f"{stage.name}: {status}", file=sys.stderr)
        return 0
    except ConfigError as exc:
        print(f"lexmatcher: config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"lexmatcher: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"lexmatcher: stage '{args.command}': {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
