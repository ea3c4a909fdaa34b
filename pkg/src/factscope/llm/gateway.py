"""Single entry point for LLM calls: render, cache, retry, account."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .prompts import TemplateId, render_prompt
from .providers import Provider, ProviderError

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "gpt-3.5-turbo-1106"


class CallError(RuntimeError):
    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


@dataclass(frozen=True)
class PromptInvocation:
    template_id: TemplateId
    bindings: Mapping[str, str]
    provider_id: str
    model_name: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_output: int = 1024

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @property
    def prompt(self) -> str:
        return render_prompt(self.template_id, self.bindings)


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: int
    completion_tokens: int
    wall_millis: int
    from_cache: bool = False
    approximate_tokens: bool = False
    attempts: int = 1
    template_id: Optional[TemplateId] = None


@dataclass(frozen=True)
class UsageReport:
    total_calls: int = 0
    cache_hits: int = 0
    total_prompt_tokens: int = 0
    total_completion_tokens: int = 0
    total_wall_millis: int = 0
    approximate_tokens: bool = False

    @property
    def avg_tokens(self) -> float:
        if not self.total_calls:
            return 0.0
        return (self.total_prompt_tokens + self.total_completion_tokens) / self.total_calls

    @property
    def avg_wall_millis(self) -> float:
        return self.total_wall_millis / self.total_calls if self.total_calls else 0.0

    def to_dict(self) -> dict:
        return {
            "total_calls": self.total_calls,
            "cache_hits": self.cache_hits,
            "total_prompt_tokens": self.total_prompt_tokens,
            "total_completion_tokens": self.total_completion_tokens,
            "total_wall_millis": self.total_wall_millis,
            "avg_tokens_per_call": self.avg_tokens,
            "avg_wall_millis_per_call": self.avg_wall_millis,
            "approximate_tokens": self.approximate_tokens,
        }


def usage_summary(call_log: Iterable[CompletionResult]) -> UsageReport:
    calls = hits = pt = ct = ms = 0
    approx = False
    for r in call_log:
        calls += 1
        hits += r.from_cache
        pt += r.prompt_tokens
        ct += r.completion_tokens
        ms += r.wall_millis
        approx = approx or r.approximate_tokens
    return UsageReport(calls, hits, pt, ct, ms, approx)


def cache_key(provider_id: str, model_name: str, temperature: float, prompt: str, reprompt: int = 0) -> str:
    parts: list = [provider_id, model_name, float(temperature), prompt]
    if reprompt:
        # a reprompt must not be answered by the cached reply it is retrying
        parts.append(f"reprompt={reprompt}")
    blob = json.dumps(parts, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ResponseCache:
    """Append-only JSON-lines completion cache; the last record for a key wins."""

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path else None
        self._records: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            with self.path.open(encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        logger.warning("skipping corrupt cache line in %s", self.path)
                        continue
                    self._records[rec["key"]] = rec

    def __len__(self) -> int:
        return len(self._records)

    def get(self, key: str) -> Optional[dict]:
        return self._records.get(key)

    def put(self, key: str, record: dict) -> None:
        record = {"key": key, **record}
        with self._lock:
            self._records[key] = record
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as f:
                    f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def _approx_tokens(text: str) -> int:
    return len(text.split())


def complete(
    invocation: PromptInvocation,
    cache: Optional[ResponseCache],
    provider: Provider,
    *,
    retries: int = 2,
    reprompt: int = 0,
) -> CompletionResult:
    """Answer ``invocation`` from the cache, or from ``provider`` with up to ``retries`` retries.

    Raises:
        CallError: the provider kept failing; ``attempts`` is retries + 1.
        ProtocolError: the provider returned an unusable payload.
    """
    t0 = time.perf_counter()
    prompt = invocation.prompt
    key = cache_key(invocation.provider_id, invocation.model_name, invocation.temperature, prompt, reprompt)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            usage = hit.get("usage", {})
            return CompletionResult(
                text=hit["completion"],
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
                wall_millis=int((time.perf_counter() - t0) * 1000),
                from_cache=True,
                approximate_tokens=bool(usage.get("approximate", False)),
                template_id=invocation.template_id,
            )

    attempts = 0
    while True:
        attempts += 1
        try:
            resp = provider.complete(
                prompt,
                model=invocation.model_name,
                temperature=invocation.temperature,
                max_output=invocation.max_output,
            )
            break
        except ProviderError as e:
            logger.warning("provider %s attempt %d failed: %s", invocation.provider_id, attempts, e)
            if attempts > retries:
                raise CallError(f"provider {invocation.provider_id} failed: {e}", attempts) from e

    approx = resp.prompt_tokens is None or resp.completion_tokens is None
    pt = resp.prompt_tokens if resp.prompt_tokens is not None else _approx_tokens(prompt)
    ct = resp.completion_tokens if resp.completion_tokens is not None else _approx_tokens(resp.text)
    result = CompletionResult(
        text=resp.text,
        prompt_tokens=pt,
        completion_tokens=ct,
        wall_millis=int((time.perf_counter() - t0) * 1000),
        approximate_tokens=approx,
        attempts=attempts,
        template_id=invocation.template_id,
    )
    if cache is not None:
        cache.put(
            key,
            {
                "invocation": {
                    "template_id": invocation.template_id.value,
                    "provider_id": invocation.provider_id,
                    "model_name": invocation.model_name,
                    "temperature": invocation.temperature,
                    "reprompt": reprompt,
                },
                "completion": resp.text,
                "usage": {"prompt_tokens": pt, "completion_tokens": ct, "approximate": approx},
                "timestamp": time.time(),
            },
        )
    return result


@dataclass(frozen=True)
class ModelSettings:
    model_name: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_output: int = 1024


@dataclass
class Gateway:
    """Holds the provider, cache and per-template model settings, and logs every call.

    ``overrides`` lets individual steps (say, fact-consistency judging) use a
    different evaluator model; by default every step shares ``settings``.
    """

    provider: Provider
    cache: Optional[ResponseCache] = None
    settings: ModelSettings = field(default_factory=ModelSettings)
    overrides: dict[TemplateId, ModelSettings] = field(default_factory=dict)
    retries: int = 2
    call_log: list[CompletionResult] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()

    def invocation(self, template_id: TemplateId, bindings: Mapping[str, str]) -> PromptInvocation:
        s = self.overrides.get(template_id, self.settings)
        return PromptInvocation(
            template_id=template_id,
            bindings=dict(bindings),
            provider_id=self.provider.provider_id,
            model_name=s.model_name,
            temperature=s.temperature,
            max_output=s.max_output,
        )

    def complete(self, invocation: PromptInvocation, *, reprompt: int = 0) -> CompletionResult:
        result = complete(invocation, self.cache, self.provider, retries=self.retries, reprompt=reprompt)
        with self._lock:
            self.call_log.append(result)
        return result

    def run(self, template_id: TemplateId, bindings: Mapping[str, str], *, reprompt: int = 0) -> CompletionResult:
        return self.complete(self.invocation(template_id, bindings), reprompt=reprompt)

    def usage(self) -> UsageReport:
        with self._lock:
            return usage_summary(list(self.call_log))

    @property
    def provider_calls(self) -> int:
        return sum(1 for r in self.call_log if not r.from_cache)
