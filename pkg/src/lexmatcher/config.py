"""Pipeline configuration: one TOML file with a section per stage."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .augment import EndpointConfig
from .filter import FilterConfig
from .sft import BuildConfig
from .text import LanguagePair, default_lemmatizer, load_stopwords, split_langs


class ConfigError(ValueError):
    pass


@dataclass
class PathsConfig:
    src: str | None = None
    tgt: str | None = None
    scores: str | None = None
    dict: str | None = None
    entities: str | None = None
    source_stopwords: str | None = None
    target_stopwords: str | None = None
    lemma_exceptions: str | None = None
    source_lemmas: str | None = None
    target_lemmas: str | None = None
    out_dir: str | None = None


@dataclass
class MatchConfig:
    k: int = 3
    rank: bool = True
    max_segment_len: int = 8


@dataclass
class AugmentConfig:
    online: bool = False
    template: str | None = None
    responses: str | None = None
    retry_invalid: bool = False
    url: str = EndpointConfig.url
    model: str = EndpointConfig.model
    temperature: float = EndpointConfig.temperature
    timeout: float = EndpointConfig.timeout
    max_attempts: int = EndpointConfig.max_attempts
    backoff: float = EndpointConfig.backoff
    concurrency: int = EndpointConfig.concurrency

    def endpoint(self) -> EndpointConfig:
        return EndpointConfig(self.url, self.model, self.temperature, self.timeout, self.max_attempts,
                              self.backoff, self.concurrency, offline=not self.online)


@dataclass
class SFTConfig:
    general_templates: dict[str, list[str]] | None = None
    constrained_template: str | None = None
    max_constrained_per_direction: int = 10_000
    max_constraints_per_sample: int = 3
    directions: list[str] | None = None
    constrained_replaces_general: bool = False

    def build_config(self, seed: int) -> BuildConfig:
        kwargs: dict[str, Any] = dict(
            max_constrained_per_direction=self.max_constrained_per_direction,
            max_constraints_per_sample=self.max_constraints_per_sample,
            rng_seed=seed,
            constrained_replaces_general=self.constrained_replaces_general,
        )
        if self.general_templates is not None:
            kwargs["general_templates"] = {k: list(v) for k, v in self.general_templates.items()}
        if self.constrained_template is not None:
            kwargs["constrained_template"] = self.constrained_template
        return BuildConfig(**kwargs)


@dataclass
class StatsConfig:
    ks: list[int] = field(default_factory=lambda: [1, 2, 3])
    top: int = 100


@dataclass
class FilterSection:
    score_scale: str = "percent"
    options: FilterConfig = field(default_factory=FilterConfig)


_SECTIONS = {
    "paths": PathsConfig,
    "match": MatchConfig,
    "augment": AugmentConfig,
    "sft": SFTConfig,
    "stats": StatsConfig,
}
_TOP_LEVEL = {"langs", "seed", "threads"}
_PATH_FIELDS_OUTSIDE_PATHS = {("augment", "template"), ("augment", "responses")}


@dataclass
class PipelineConfig:
    langs: str = "en-zh"
    seed: int = 42
    threads: int = 1
    paths: PathsConfig = field(default_factory=PathsConfig)
    filter: FilterSection = field(default_factory=FilterSection)
    match: MatchConfig = field(default_factory=MatchConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    sft: SFTConfig = field(default_factory=SFTConfig)
    stats: StatsConfig = field(default_factory=StatsConfig)

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path | None = None) -> "PipelineConfig":
        cfg = cls()
        base = Path(base_dir) if base_dir is not None else None
        for key, value in data.items():
            if key in _TOP_LEVEL:
                setattr(cfg, key, value)
            elif key == "filter":
                cfg.filter = _filter_section(value)
            elif key in _SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(f"config key {key!r} must be a table")
                section_cls = _SECTIONS[key]
                known = {f.name for f in fields(section_cls)}
                for sub in value:
                    if sub not in known:
                        raise ConfigError(f"unknown config key '{key}.{sub}'")
                setattr(cfg, key, section_cls(**value))
            else:
                raise ConfigError(f"unknown config key '{key}'")
        try:
            split_langs(cfg.langs)
        except ValueError as exc:
            raise ConfigError(f"config key 'langs': {exc}") from None
        if base is not None:
            cfg._resolve_paths(base)
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(data, path.parent)

    def _resolve_paths(self, base: Path) -> None:
        for f in fields(PathsConfig):
            value = getattr(self.paths, f.name)
            if value is not None and not Path(value).is_absolute():
                setattr(self.paths, f.name, str(base / value))
        for section, name in _PATH_FIELDS_OUTSIDE_PATHS:
            obj = getattr(self, section)
            value = getattr(obj, name)
            if value is not None and not Path(value).is_absolute():
                setattr(obj, name, str(base / value))

    def language_pair(self) -> LanguagePair:
        src, tgt = split_langs(self.langs)
        p = self.paths
        return LanguagePair.from_tag(
            self.langs,
            source_stopwords=load_stopwords(p.source_stopwords) if p.source_stopwords else None,
            target_stopwords=load_stopwords(p.target_stopwords) if p.target_stopwords else None,
            source_lemmatizer=default_lemmatizer(src, p.lemma_exceptions),
            target_lemmatizer=default_lemmatizer(tgt, p.lemma_exceptions),
        )

    def section_digest(self, *sections: str) -> str:
        """Stable digest of the named sections (plus langs and seed)."""
        payload = {"langs": self.langs, "seed": self.seed}
        for name in sections:
            payload[name] = _jsonable(getattr(self, name))
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def _filter_section(value: Any) -> FilterSection:
    if not isinstance(value, dict):
        raise ConfigError("config key 'filter' must be a table")
    value = dict(value)
    scale = value.pop("score_scale", "percent")
    if scale not in ("unit", "percent"):
        raise ConfigError(f"config key 'filter.score_scale' must be 'unit' or 'percent', got {scale!r}")
    try:
        options = FilterConfig.from_dict(value)
    except KeyError as exc:
        raise ConfigError(f"unknown config key 'filter.{exc.args[0]}'") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config section 'filter': {exc}") from None
    return FilterSection(scale, options)


def _jsonable(obj: Any) -> Any:
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    return obj
