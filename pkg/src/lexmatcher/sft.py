"""Instruction-tuning records from the retrieved and synthesized pairs."""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .matcher import MatchRecord
from .text import LanguagePair, contains_segment, language_name, split_langs

logger = logging.getLogger(__name__)

DEFAULT_GENERAL_TEMPLATES = (
    "Translate the following sentence from {src} to {tgt}.",
    "Translate the following {src} sentence into {tgt}.",
    "Please translate this sentence into {tgt}.",
)
DEFAULT_CONSTRAINED_TEMPLATE = (
    "{constraints} Translate the following sentence from {src} to {tgt} using the given reference translations."
)
ANY_DIRECTION = "*"


class BuildConfigError(ValueError):
    pass


@dataclass
class BuildConfig:
    general_templates: dict[str, list[str]] = field(
        default_factory=lambda: {ANY_DIRECTION: list(DEFAULT_GENERAL_TEMPLATES)}
    )
    constrained_template: str = DEFAULT_CONSTRAINED_TEMPLATE
    max_constrained_per_direction: int = 10_000
    max_constraints_per_sample: int = 3
    rng_seed: int = 42
    constrained_replaces_general: bool = False

    def __post_init__(self):
        if "{constraints}" not in self.constrained_template:
            raise BuildConfigError("constrained_template needs a {constraints} slot")
        for direction, templates in self.general_templates.items():
            if not templates:
                raise BuildConfigError(f"empty general template list for direction {direction!r}")
        if self.max_constraints_per_sample < 1 or self.max_constrained_per_direction < 0:
            raise BuildConfigError("constraint caps must be non-negative (and at least 1 constraint per sample)")

    def templates_for(self, direction: str) -> list[str]:
        templates = self.general_templates.get(direction) or self.general_templates.get(ANY_DIRECTION)
        if not templates:
            raise BuildConfigError(f"no general instruction templates for direction {direction!r}")
        return templates


@dataclass(frozen=True)
class InstructionSample:
    instruction: str
    input: str
    output: str
    constraints: tuple[tuple[str, str], ...] = ()
    direction: str = ""

    def to_dict(self) -> dict:
        return {"instruction": self.instruction, "input": self.input, "output": self.output}


def _fill(template: str, direction: str, **extra) -> str:
    src, tgt = split_langs(direction)
    return template.format(src=language_name(src), tgt=language_name(tgt), **extra)


def _rng(seed: int, *labels: str) -> random.Random:
    # string seeds are hashed with sha512, so this is stable across processes
    return random.Random(":".join([str(seed), *labels]))


def _orient(source: str, target: str, corpus_langs: str, direction: str) -> tuple[str, str]:
    if direction == corpus_langs:
        return source, target
    src, tgt = split_langs(corpus_langs)
    if direction == f"{tgt}-{src}":
        return target, source
    raise BuildConfigError(f"direction {direction!r} does not fit corpus languages {corpus_langs!r}")


def build_general(pairs: Iterable, cfg: BuildConfig, corpus_langs: str = "en-zh",
                  direction: str | None = None) -> list[InstructionSample]:
    """One general instruction sample per pair.

    ``pairs`` may mix corpus SentencePairs and GeneratedPairs (anything with
    ``source_text``/``target_text``). Templates are assigned round-robin from
    a seeded starting offset.
    """
    direction = direction or corpus_langs
    templates = cfg.templates_for(direction)
    offset = _rng(cfg.rng_seed, direction, "general").randrange(len(templates))
    out = []
    for i, pair in enumerate(pairs):
        x, y = _orient(pair.source_text, pair.target_text, corpus_langs, direction)
        instruction = _fill(templates[(offset + i) % len(templates)], direction)
        out.append(InstructionSample(instruction, x, y, (), direction))
    return out


def render_constraints(constraints: Sequence[tuple[str, str]]) -> str:
    return " ".join(f'"{s}" means "{t}".' for s, t in constraints)


def build_constrained(subset: Sequence, records: Sequence[MatchRecord], cfg: BuildConfig,
                      lang: LanguagePair | None = None, direction: str | None = None) -> list[InstructionSample]:
    """Constrained-translation samples for a seeded sample of matched pairs.

    Each sample carries up to ``max_constraints_per_sample`` distinct matched
    segment pairs (surface form from the sentence, dictionary spelling of the
    translation) rendered as ``"s" means "t".`` clauses ahead of the
    instruction. Constraints failing lemma-level containment are dropped.
    """
    pairs = list(subset)
    if len(pairs) != len(records):
        raise ValueError(f"{len(records)} match records for {len(pairs)} subset pairs")
    corpus_langs = getattr(subset, "langs", None) or (lang.tag if lang else "en-zh")
    lang = lang or LanguagePair.from_tag(corpus_langs)
    direction = direction or corpus_langs
    reverse = direction != corpus_langs
    _orient("x", "y", corpus_langs, direction)
    rng = _rng(cfg.rng_seed, direction, "constrained")

    # walk a seeded permutation of the eligible pairs so that pairs whose
    # constraints all fail the containment check are replaced, not lost
    eligible = [i for i, r in enumerate(records) if r.matched]
    rng.shuffle(eligible)
    built: list[tuple[int, InstructionSample]] = []
    dropped = 0
    for i in eligible:
        if len(built) >= cfg.max_constrained_per_direction:
            break
        pair, record = pairs[i], records[i]
        if record.pair_index != pair.index:
            raise ValueError(f"record for pair {record.pair_index} aligned with pair {pair.index}")
        src_lemmas = lang.source.lemmas(pair.source_text)
        tgt_lemmas = lang.target.lemmas(pair.target_text)
        options = []
        seen = set()
        for m in sorted(record.matched, key=lambda m: m.position):
            surface = m.surface or m.sense.source_text
            key = (surface, m.sense.target_text)
            if key in seen:
                continue
            seen.add(key)
            if not (contains_segment(src_lemmas, lang.source.lemmas(surface))
                    and contains_segment(tgt_lemmas, lang.target.lemmas(m.sense.target_text))):
                dropped += 1
                continue
            options.append((m.position, key))
        if not options:
            continue
        picked = rng.sample(options, min(cfg.max_constraints_per_sample, len(options)))
        constraints = tuple(c for _, c in sorted(picked))
        x, y = pair.source_text, pair.target_text
        if reverse:
            constraints = tuple((t, s) for s, t in constraints)
            x, y = y, x
        instruction = _fill(cfg.constrained_template, direction, constraints=render_constraints(constraints))
        built.append((i, InstructionSample(instruction, x, y, constraints, direction)))
    out = [sample for _, sample in sorted(built, key=lambda b: b[0])]
    if dropped:
        logger.warning("dropped %d constraints that failed the containment check", dropped)
    return out


def build_dataset(subset, records: Sequence[MatchRecord], augmented: Sequence, cfg: BuildConfig,
                  lang: LanguagePair | None = None, directions: Sequence[str] | None = None) -> list[InstructionSample]:
    """General samples for the subset and the synthesized pairs plus constrained samples, per direction."""
    corpus_langs = subset.langs
    lang = lang or LanguagePair.from_tag(corpus_langs)
    samples: list[InstructionSample] = []
    for direction in directions or [corpus_langs]:
        constrained = build_constrained(subset, records, cfg, lang, direction)
        if cfg.constrained_replaces_general:
            taken = {(s.input, s.output) for s in constrained}
            base = [p for p in subset if _orient(p.source_text, p.target_text, corpus_langs, direction) not in taken]
        else:
            base = list(subset)
        samples.extend(build_general([*base, *augmented], cfg, corpus_langs, direction))
        samples.extend(constrained)
    return samples


def emit_dataset(samples: Sequence[InstructionSample], out_path: str | Path, seed: int = 42) -> None:
    """Write samples as shuffled JSONL; same seed, same bytes."""
    order = list(range(len(samples)))
    random.Random(seed).shuffle(order)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for i in order:
            fh.write(json.dumps(samples[i].to_dict(), ensure_ascii=False) + "\n")
