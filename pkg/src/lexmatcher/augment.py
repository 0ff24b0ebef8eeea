"""Synthetic demonstrations for senses the corpus does not cover.

Prompts are rendered from a template file, sent to a chat-completions
endpoint (or written to ``prompts.jsonl`` for offline execution), and the
answers are parsed and checked for lemma-level containment of the sense.
"""

from __future__ import annotations

import json
import logging
import os
import re
import socket
import string
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from .lexicon import SensePair
from .text import LanguagePair, contains_segment, language_name

logger = logging.getLogger(__name__)

REQUIRED_PLACEHOLDERS = frozenset({"source_lang", "target_lang", "source_segment", "target_segment", "definition"})
NO_DEFINITION = "(no definition available)"
API_KEY_ENV = "LEXMATCHER_API_KEY"

_LABEL = re.compile(r"^[\s>*#_-]*(source|target)[\s*_]*[:：]\s*(.*?)\s*$", re.IGNORECASE)


class TemplateError(ValueError):
    pass


class AuthenticationError(RuntimeError):
    pass


@dataclass(frozen=True)
class AugmentPrompt:
    sense: SensePair
    rendered_text: str


@dataclass(frozen=True)
class LLMResponse:
    sense_id: str
    text: str | None
    error: str | None = None
    attempts: int = 0


@dataclass(frozen=True)
class GeneratedPair:
    sense_id: str
    source_text: str
    target_text: str
    raw_response: str
    valid: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return {"sense_id": self.sense_id, "source": self.source_text, "target": self.target_text,
                "valid": self.valid, "reason": self.reason}


@dataclass
class EndpointConfig:
    url: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    timeout: float = 60.0
    max_attempts: int = 3
    backoff: float = 1.0
    concurrency: int = 4
    api_key_env: str = API_KEY_ENV
    offline: bool = True


def _placeholders(template: string.Template) -> set[str]:
    names = set()
    for m in template.pattern.finditer(template.template):
        name = m.group("named") or m.group("braced")
        if name:
            names.add(name)
    return names


def load_template(path: str | Path | None = None) -> string.Template:
    """Read a ``$placeholder`` prompt template, checking required slots."""
    if path is None:
        text = resources.files("lexmatcher").joinpath("data/augment_prompt.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    template = string.Template(text)
    missing = REQUIRED_PLACEHOLDERS - _placeholders(template)
    if missing:
        raise TemplateError(f"prompt template lacks placeholder(s): {', '.join(sorted(missing))}")
    return template


def render_prompts(gaps: Sequence[SensePair], template_path: str | Path | None = None,
                   langs: str = "en-zh") -> list[AugmentPrompt]:
    template = load_template(template_path)
    src, tgt = langs.split("-")
    return [
        AugmentPrompt(
            sense,
            template.safe_substitute(
                source_lang=language_name(src),
                target_lang=language_name(tgt),
                source_segment=sense.source_text,
                target_segment=sense.target_text,
                definition=sense.definition or NO_DEFINITION,
            ),
        )
        for sense in gaps
    ]


# transport(url, headers, body, timeout) -> (status, body); raises TimeoutError / OSError on network failure
Transport = Callable[[str, dict, bytes, float], tuple[int, bytes]]


def urllib_transport(url: str, headers: dict, body: bytes, timeout: float) -> tuple[int, bytes]:
    req = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()
    except socket.timeout as exc:
        raise TimeoutError(str(exc)) from exc


def _complete_one(prompt: AugmentPrompt, endpoint: EndpointConfig, api_key: str, transport: Transport,
                  sleep: Callable[[float], None]) -> LLMResponse:
    body = json.dumps({
        "model": endpoint.model,
        "temperature": endpoint.temperature,
        "messages": [{"role": "user", "content": prompt.rendered_text}],
    }).encode("utf-8")
    headers = {"Content-Type": "application/json", "Authorization": f"Bearer {api_key}"}
    error = "no attempt made"
    for attempt in range(1, endpoint.max_attempts + 1):
        try:
            status, payload = transport(endpoint.url, headers, body, endpoint.timeout)
        except (TimeoutError, OSError) as exc:
            error = f"{type(exc).__name__}: {exc}"
        else:
            if status in (401, 403):
                raise AuthenticationError(f"endpoint rejected the API key (HTTP {status})")
            if status == 200:
                try:
                    text = json.loads(payload)["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError):
                    return LLMResponse(prompt.sense.sense_id, None, "malformed completion payload", attempt)
                return LLMResponse(prompt.sense.sense_id, text, None, attempt)
            error = f"HTTP {status}"
            if status != 429 and status < 500:
                return LLMResponse(prompt.sense.sense_id, None, error, attempt)
        if attempt < endpoint.max_attempts:
            sleep(endpoint.backoff * 2 ** (attempt - 1))
    logger.warning("giving up on sense %s after %d attempts: %s", prompt.sense.sense_id, endpoint.max_attempts, error)
    return LLMResponse(prompt.sense.sense_id, None, error, endpoint.max_attempts)


def call_llm(prompts: Sequence[AugmentPrompt], endpoint: EndpointConfig | None = None,
             transport: Transport | None = None, prompts_path: str | Path | None = None,
             sleep: Callable[[float], None] = time.sleep) -> list[LLMResponse]:
    """Get one response per prompt, in prompt order.

    In offline mode nothing is sent: prompts are written to ``prompts_path``
    and every response is returned as pending. Online, failed requests are
    retried with exponential backoff and recorded, never raised, except for
    authentication failures, which abort the batch.
    """
    endpoint = endpoint or EndpointConfig()
    if endpoint.offline:
        if prompts_path is None:
            raise ValueError("offline mode needs prompts_path")
        write_prompts(prompts, prompts_path)
        return [LLMResponse(p.sense.sense_id, None, "pending offline execution") for p in prompts]
    api_key = os.environ.get(endpoint.api_key_env)
    if not api_key:
        raise AuthenticationError(f"environment variable {endpoint.api_key_env} is not set")
    transport = transport or urllib_transport
    with ThreadPoolExecutor(max_workers=max(1, endpoint.concurrency)) as pool:
        futures = [pool.submit(_complete_one, p, endpoint, api_key, transport, sleep) for p in prompts]
        try:
            return [f.result() for f in futures]
        except AuthenticationError:
            for f in futures:
                f.cancel()
            raise


def write_prompts(prompts: Sequence[AugmentPrompt], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, p in enumerate(prompts):
            fh.write(json.dumps({"index": i, "sense_id": p.sense.sense_id, "prompt": p.rendered_text},
                                ensure_ascii=False) + "\n")


def write_responses(responses: Sequence[LLMResponse], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, r in enumerate(responses):
            rec = {"index": i, "sense_id": r.sense_id, "response": r.text}
            if r.error:
                rec["error"] = r.error
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_responses(path: str | Path, prompts: Sequence[AugmentPrompt]) -> list[LLMResponse]:
    """Align a ``responses.jsonl`` file with ``prompts``.

    Records are matched by ``index`` when present, else by ``sense_id``.
    Prompts without a record get an empty response marked as missing.
    """
    by_index: dict[int, dict] = {}
    by_sense: dict[str, list[dict]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            if "index" in rec:
                by_index[int(rec["index"])] = rec
            else:
                by_sense.setdefault(rec["sense_id"], []).append(rec)
    out = []
    for i, p in enumerate(prompts):
        rec = by_index.get(i)
        if rec is None and by_sense.get(p.sense.sense_id):
            rec = by_sense[p.sense.sense_id].pop(0)
        if rec is None:
            out.append(LLMResponse(p.sense.sense_id, None, "missing response"))
        else:
            out.append(LLMResponse(p.sense.sense_id, rec.get("response"), rec.get("error")))
    return out


def _clean(value: str) -> str:
    value = value.strip().strip("*").strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'“”":
        value = value[1:-1].strip()
    return value


def parse_response(text: str) -> tuple[str | None, str | None]:
    """First ``Source:`` and first ``Target:`` labeled lines, labels case-insensitive."""
    found: dict[str, str] = {}
    for line in text.splitlines():
        m = _LABEL.match(line)
        if m:
            label = m.group(1).lower()
            if label not in found and m.group(2).strip():
                found[label] = _clean(m.group(2))
    return found.get("source"), found.get("target")


def parse_and_validate(responses: Sequence[LLMResponse | str | None], gaps: Sequence[SensePair],
                       lang: LanguagePair) -> list[GeneratedPair]:
    """Parse responses aligned to ``gaps``; invalid pairs are kept, flagged with a reason."""
    if len(responses) != len(gaps):
        raise ValueError(f"{len(responses)} responses for {len(gaps)} senses")
    out = []
    for resp, sense in zip(responses, gaps):
        if isinstance(resp, LLMResponse):
            text, error = resp.text, resp.error
        else:
            text, error = resp, None
        if text is None:
            out.append(GeneratedPair(sense.sense_id, "", "", "", False, error or "no response"))
            continue
        src, tgt = parse_response(text)
        if src is None or tgt is None:
            missing = "Source" if src is None else "Target"
            out.append(GeneratedPair(sense.sense_id, src or "", tgt or "", text, False, f"{missing} line absent"))
            continue
        reason = ""
        if not contains_segment(lang.source.lemmas(src), sense.source_segment):
            reason = "source segment absent"
        elif not contains_segment(lang.target.lemmas(tgt), sense.target_segment):
            reason = "target segment absent"
        out.append(GeneratedPair(sense.sense_id, src, tgt, text, not reason, reason))
    return out


def write_augmented(pairs: Sequence[GeneratedPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            fh.write(json.dumps(p.to_dict(), ensure_ascii=False) + "\n")


def read_augmented(path: str | Path, valid_only: bool = True) -> list[GeneratedPair]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            pair = GeneratedPair(rec["sense_id"], rec["source"], rec["target"], "", bool(rec["valid"]),
                                 rec.get("reason", ""))
            if pair.valid or not valid_only:
                out.append(pair)
    return out
