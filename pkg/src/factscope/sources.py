"""Fact sources: scenario planning, document chunking, source assembly, web search."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Union

from .model import Origin, Passage, Sample, Scenario, Stage

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_TOKENS = 1024
DEFAULT_TOP_K = 10


class ScenarioError(ValueError):
    pass


class SearchError(RuntimeError):
    pass


# the five standard orderings; search + model knowledge always closes the list
SCENARIO_PRESETS: dict[str, str] = {
    "se+lk": "se+lk",
    "he,se+lk": "he,se+lk",
    "rd,se+lk": "rd,se+lk",
    "he,rd,se+lk": "he,rd,se+lk",
    "rd,he,se+lk": "rd,he,se+lk",
}


def plan_scenario(spec: str, name: str = "") -> Scenario:
    """Parse a comma list over ``he``, ``rd``, ``mrd``, ``se+lk`` into a Scenario.

    ``se+lk`` is appended when missing. Unknown or repeated tokens raise
    ScenarioError.
    """
    tokens = [t.strip().lower() for t in spec.split(",") if t.strip()]
    stages: list[Stage] = []
    for tok in tokens:
        try:
            stage = Stage(tok)
        except ValueError:
            raise ScenarioError(f"unknown fact source {tok!r}") from None
        if stage in stages:
            raise ScenarioError(f"duplicate fact source {tok!r}")
        stages.append(stage)
    if Stage.SEARCH_PLUS_LLM in stages and stages[-1] is not Stage.SEARCH_PLUS_LLM:
        raise ScenarioError("se+lk must be the last fact source")
    if not stages or stages[-1] is not Stage.SEARCH_PLUS_LLM:
        stages.append(Stage.SEARCH_PLUS_LLM)
    return Scenario(tuple(stages), name=name)


_SENTENCE_END = re.compile(r"[.!?][\"')\]]*$")


def chunk_document(
    text: str,
    max_tokens: int = DEFAULT_CHUNK_TOKENS,
    *,
    doc_id: str = "",
    origin: Origin = Origin.MODEL_RETRIEVED_DOC,
    start_index: int = 0,
) -> list[Passage]:
    """Split ``text`` into passages of at most ``max_tokens`` whitespace tokens.

    A chunk ends after the last sentence-final token inside the window when
    that keeps the chunk at least half full; otherwise the window is cut at
    the limit. Chunks are the original tokens re-joined by single spaces.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    tokens = text.split()
    passages = []
    pos = 0
    while pos < len(tokens):
        end = min(pos + max_tokens, len(tokens))
        if end < len(tokens):
            floor = pos + max(1, max_tokens // 2)
            for k in range(end, floor - 1, -1):
                if _SENTENCE_END.search(tokens[k - 1]):
                    end = k
                    break
        passages.append(
            Passage(text=" ".join(tokens[pos:end]), origin=origin, doc_id=doc_id, index=start_index + len(passages))
        )
        pos = end
    return passages


def chunk_passages(passages: Sequence[Passage], max_tokens: int, origin: Origin) -> tuple[Passage, ...]:
    out: list[Passage] = []
    for k, p in enumerate(passages):
        out.extend(
            chunk_document(p.text, max_tokens, doc_id=p.doc_id or str(k), origin=origin, start_index=len(out))
        )
    return tuple(out)


@dataclass(frozen=True)
class FactSource:
    stage: Stage
    passages: tuple[Passage, ...] = ()

    @property
    def deferred(self) -> bool:
        # search snippets are fetched per fact unit at verification time
        return self.stage is Stage.SEARCH_PLUS_LLM


def build_sources(
    sample: Sample,
    scenario: Scenario,
    evaluated_model_id: str,
    chunk_limit: int = DEFAULT_CHUNK_TOKENS,
    diagnostics: Optional[list[str]] = None,
) -> list[FactSource]:
    """One FactSource per scenario stage, in scenario order."""
    sources = []
    for stage in scenario.stages:
        if stage is Stage.HUMAN_EVIDENCE:
            passages = tuple(sample.human_evidence)
        elif stage is Stage.REFERENCE_DOCS:
            passages = tuple(sample.reference_docs)
        elif stage is Stage.MODEL_RETRIEVED_DOCS:
            raw = sample.model_retrieved_docs.get(evaluated_model_id, ())
            passages = chunk_passages(raw, chunk_limit, Origin.MODEL_RETRIEVED_DOC)
        else:
            sources.append(FactSource(stage))
            continue
        if not passages and diagnostics is not None:
            diagnostics.append(f"fact source {stage.value} is empty for sample {sample.id}")
        sources.append(FactSource(stage, passages))
    return sources


@dataclass(frozen=True)
class SearchSnippet:
    title: str
    snippet: str
    rank: int
    url: str = ""

    def to_dict(self) -> dict:
        return {"title": self.title, "snippet": self.snippet, "rank": self.rank, "url": self.url}


class SearchBackend(Protocol):
    backend_id: str

    def search(self, query: str, top_k: int) -> list[dict]: ...


def query_digest(query: str) -> str:
    return hashlib.sha256(query.encode("utf-8")).hexdigest()


class FixtureSearchBackend:
    """Canned results keyed by query digest (or by the literal query string)."""

    backend_id = "fixture"

    def __init__(self, results: Mapping[str, list[dict]]):
        self._results = {}
        for key, hits in results.items():
            is_digest = len(key) == 64 and all(c in "0123456789abcdef" for c in key)
            self._results[key if is_digest else query_digest(key)] = list(hits)
        self.calls = 0

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "FixtureSearchBackend":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def search(self, query: str, top_k: int) -> list[dict]:
        self.calls += 1
        return self._results.get(query_digest(query), [])[:top_k]


class SerpApiBackend:
    """Google results through SerpAPI; the key comes from ``SERPAPI_API_KEY``."""

    backend_id = "serpapi"

    def __init__(self, api_key: Optional[str] = None, timeout: float = 20.0, client=None):
        import httpx

        self.api_key = api_key or os.environ.get("SERPAPI_API_KEY", "")
        self._client = client or httpx.Client(timeout=timeout)

    def search(self, query: str, top_k: int) -> list[dict]:
        import httpx

        params = {"q": query, "engine": "google", "num": top_k, "api_key": self.api_key}
        try:
            r = self._client.get("https://serpapi.com/search.json", params=params)
            r.raise_for_status()
            data = r.json()
        except (httpx.HTTPError, ValueError) as e:
            raise SearchError(f"serpapi request failed: {e}") from e
        return [
            {"title": it.get("title", ""), "snippet": it.get("snippet", ""), "url": it.get("link", "")}
            for it in data.get("organic_results", [])[:top_k]
        ]


@dataclass
class SearchClient:
    """Wraps a backend with truncation to ``top_k`` and a query-digest cache."""

    backend: SearchBackend
    top_k: int = DEFAULT_TOP_K
    cache_path: Optional[Path] = None
    backend_calls: int = 0
    _cache: dict[str, list[dict]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._lock = threading.Lock()
        if self.cache_path is not None:
            self.cache_path = Path(self.cache_path)
            if self.cache_path.exists():
                with self.cache_path.open(encoding="utf-8") as f:
                    for line in f:
                        if line.strip():
                            rec = json.loads(line)
                            self._cache[rec["key"]] = rec["results"]

    def _cache_key(self, query: str) -> str:
        return query_digest(f"{self.backend.backend_id}\x00{self.top_k}\x00{query}")

    def fetch(self, query: str) -> list[SearchSnippet]:
        key = self._cache_key(query)
        hits = self._cache.get(key)
        if hits is None:
            try:
                raw = self.backend.search(query, self.top_k)
            except SearchError:
                raise
            except Exception as e:
                raise SearchError(f"search backend {self.backend.backend_id} failed: {e}") from e
            hits = [
                {"title": h.get("title", "") or "", "snippet": h.get("snippet", "") or "", "url": h.get("url", "") or ""}
                for h in raw[: self.top_k]
            ]
            with self._lock:
                self.backend_calls += 1
                self._cache[key] = hits
                if self.cache_path is not None:
                    self.cache_path.parent.mkdir(parents=True, exist_ok=True)
                    with self.cache_path.open("a", encoding="utf-8") as f:
                        f.write(json.dumps({"key": key, "query": query, "results": hits}, ensure_ascii=False) + "\n")
        return [SearchSnippet(h["title"], h["snippet"], rank, h["url"]) for rank, h in enumerate(hits)]


def compose_query(question: str, keywords: str) -> str:
    keywords = (keywords or "").strip()
    return f"{keywords} {question.strip()}" if keywords else question.strip()


def search(question: str, keywords: str, client: SearchClient) -> list[SearchSnippet]:
    """Search for ``"<keywords> <question>"``; at most ``client.top_k`` snippets, ranks from 0."""
    return client.fetch(compose_query(question, str(keywords)))


def load_search_backend(spec: str) -> Optional[SearchBackend]:
    """``fixture:<file>``, ``serpapi`` or ``none``."""
    kind, _, arg = spec.partition(":")
    if kind == "none" or not kind:
        return None
    if kind == "fixture":
        return FixtureSearchBackend.from_file(arg)
    if kind == "serpapi":
        return SerpApiBackend()
    raise ValueError(f"unknown search backend {spec!r}")
