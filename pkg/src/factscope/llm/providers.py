"""Provider adapters.

A provider turns one rendered prompt into one completion. Everything else
(caching, retries, accounting) lives in the gateway.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Union


class ProviderError(RuntimeError):
    """Transient failure talking to a provider; the gateway retries these."""


class ProtocolError(RuntimeError):
    """The provider answered, but the payload is not a usable completion."""


@dataclass(frozen=True)
class ProviderResponse:
    text: str
    prompt_tokens: Optional[int] = None
    completion_tokens: Optional[int] = None


class Provider(Protocol):
    provider_id: str

    def complete(self, prompt: str, *, model: str, temperature: float, max_output: int) -> ProviderResponse: ...


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class MockProvider:
    """Replays canned completions keyed by prompt digest.

    A value may be a string (returned every time) or a list of strings,
    consumed one per call; the last entry repeats once the list runs out.
    Keys may be either the sha256 digest of the prompt or the prompt itself.
    """

    provider_id = "mock"

    def __init__(self, responses: Mapping[str, Union[str, list[str]]]):
        self._responses = {}
        for key, value in responses.items():
            digest = key if _looks_like_digest(key) else prompt_digest(key)
            self._responses[digest] = value
        self._served: dict[str, int] = {}
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "MockProvider":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def complete(self, prompt: str, *, model: str = "", temperature: float = 0.0, max_output: int = 0) -> ProviderResponse:
        digest = prompt_digest(prompt)
        with self._lock:
            self.calls += 1
            if digest not in self._responses:
                raise ProtocolError(f"mock has no response for prompt digest {digest[:12]}")
            value = self._responses[digest]
            if isinstance(value, list):
                k = self._served.get(digest, 0)
                self._served[digest] = k + 1
                value = value[min(k, len(value) - 1)]
        return ProviderResponse(text=value)


def _looks_like_digest(key: str) -> bool:
    return len(key) == 64 and all(c in "0123456789abcdef" for c in key)


class ScriptedProvider:
    """Provider backed by a python callable ``prompt -> text``; handy in tests and demos."""

    provider_id = "scripted"

    def __init__(self, fn: Callable[[str], str], provider_id: str = "scripted"):
        self._fn = fn
        self.provider_id = provider_id
        self.calls = 0
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    def complete(self, prompt: str, *, model: str = "", temperature: float = 0.0, max_output: int = 0) -> ProviderResponse:
        with self._lock:
            self.calls += 1
            self.prompts.append(prompt)
        out = self._fn(prompt)
        if isinstance(out, ProviderResponse):
            return out
        return ProviderResponse(text=out)


class OpenAIChatProvider:
    """OpenAI-compatible chat-completions endpoint.

    Reads ``OPENAI_API_KEY`` and, optionally, ``OPENAI_BASE_URL``.
    """

    provider_id = "openai"

    def __init__(self, api_key: Optional[str] = None, base_url: Optional[str] = None, timeout: float = 60.0, client=None):
        import httpx

        self.api_key = api_key or os.environ.get("OPENAI_API_KEY", "")
        self.base_url = (base_url or os.environ.get("OPENAI_BASE_URL") or "https://api.openai.com/v1").rstrip("/")
        self._client = client or httpx.Client(timeout=timeout)

    def complete(self, prompt: str, *, model: str, temperature: float = 0.0, max_output: int = 1024) -> ProviderResponse:
        import httpx

        payload = {
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": max_output,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        try:
            r = self._client.post(f"{self.base_url}/chat/completions", json=payload, headers=headers)
        except httpx.HTTPError as e:
            raise ProviderError(str(e)) from e
        if r.status_code == 429 or r.status_code >= 500:
            raise ProviderError(f"HTTP {r.status_code}")
        if r.status_code >= 400:
            raise ProtocolError(f"HTTP {r.status_code}: {r.text[:200]}")
        try:
            data = r.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise ProtocolError(f"malformed completion payload: {e}") from e
        if not isinstance(text, str):
            raise ProtocolError("completion content is not text")
        usage = data.get("usage") or {}
        return ProviderResponse(text, usage.get("prompt_tokens"), usage.get("completion_tokens"))


def load_provider(spec: str) -> Provider:
    """Build a provider from ``mock:<fixture.json>`` or ``openai``."""
    kind, _, arg = spec.partition(":")
    if kind == "mock":
        if not arg:
            raise ValueError("mock provider needs a fixture path: mock:<file>")
        return MockProvider.from_file(arg)
    if kind == "openai":
        return OpenAIChatProvider(base_url=arg or None)
    raise ValueError(f"unknown provider {spec!r}")
