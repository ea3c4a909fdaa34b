"""Dataset ingestion into the unified Sample schema, golden answers, and generation helpers.

Raw records are mapped by small declarative specs rather than per-dataset
parsers. A mapping spec is a dict::

    {
      "task_kind": "RetrievalAugmentedQA",
      "id": "query_id",                 # dotted path; falls back to the line number
      "query": "query",
      "query_optional": false,          # news sets get their query (a title) later
      "gold_short_answers": "answers",  # path to a string or list of strings
      "human_evidence": [{"path": "answers"}],
      "reference_docs": [{"path": "passages", "text": "passage_text",
                          "doc_id": "url", "where": {"is_selected": 1}}]
    }

A field entry points at a string, a list of strings, or a list of objects
(then ``text``/``doc_id`` name keys inside each object and ``where`` filters
them by exact key equality).

Built-in specs cover these documented JSON-lines layouts:

=========== ===========================================================
nq          {"id", "question", "answers": [str]}
hotpotqa    {"id", "question", "answer", "docs": [{"title", "text"}]}
truthfulqa  {"id", "question", "best_answer", "correct_answers": [str]}
cnndm       {"id", "highlights", "article", "title"?}
multinews   {"id", "summary", "documents": [str], "title"?}
msmarco     {"query_id", "query", "answers": [str],
             "passages": [{"passage_text", "is_selected", "url"}]}
=========== ===========================================================
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .llm import CallError, Gateway, ProtocolError, TemplateId
from .model import Origin, Passage, Sample, TaskKind, make_passages, validate_corpus
from .sources import DEFAULT_CHUNK_TOKENS, chunk_passages

logger = logging.getLogger(__name__)

CORPUS_SCHEMA_VERSION = 1
GOLDEN_SEPARATOR = "\n"


class DatasetError(ValueError):
    pass


MAPPINGS: dict[str, dict] = {
    "nq": {
        "task_kind": "OpenDomainQA",
        "id": "id",
        "query": "question",
        "gold_short_answers": "answers",
    },
    "hotpotqa": {
        "task_kind": "WebRetrievalQA",
        "id": "id",
        "query": "question",
        "gold_short_answers": "answer",
        "reference_docs": [{"path": "docs", "text": "text", "doc_id": "title"}],
    },
    "truthfulqa": {
        "task_kind": "ExpertValidatedQA",
        "id": "id",
        "query": "question",
        "human_evidence": [{"path": "correct_answers"}, {"path": "best_answer"}],
    },
    "cnndm": {
        "task_kind": "NewsFactGeneration",
        "id": "id",
        "query": "title",
        "query_optional": True,
        "human_evidence": [{"path": "highlights"}],
        "reference_docs": [{"path": "article"}],
    },
    "multinews": {
        "task_kind": "NewsFactGeneration",
        "id": "id",
        "query": "title",
        "query_optional": True,
        "human_evidence": [{"path": "summary"}],
        "reference_docs": [{"path": "documents"}],
    },
    "msmarco": {
        "task_kind": "RetrievalAugmentedQA",
        "id": "query_id",
        "query": "query",
        "human_evidence": [{"path": "answers"}],
        "reference_docs": [{"path": "passages", "text": "passage_text", "doc_id": "url", "where": {"is_selected": 1}}],
    },
}

_MAPPING_KEYS = {"task_kind", "id", "query", "query_optional", "gold_short_answers", "human_evidence", "reference_docs"}
_MISSING = object()


def _get(record: Any, path: str) -> Any:
    cur = record
    for part in path.split("."):
        if isinstance(cur, Mapping) and part in cur:
            cur = cur[part]
        elif isinstance(cur, list) and part.isdigit() and int(part) < len(cur):
            cur = cur[int(part)]
        else:
            return _MISSING
    return cur


def _texts(record: Any, entry: Union[str, Mapping]) -> list[tuple[str, str]]:
    """(text, doc_id) pairs selected by one field entry; blank texts dropped."""
    if isinstance(entry, str):
        entry = {"path": entry}
    value = _get(record, entry["path"])
    if value is _MISSING or value is None:
        return []
    items = value if isinstance(value, list) else [value]
    out = []
    for k, item in enumerate(items):
        if isinstance(item, Mapping):
            where = entry.get("where", {})
            if any(item.get(wk) != wv for wk, wv in where.items()):
                continue
            text = item.get(entry.get("text", "text"))
            doc_id = str(item.get(entry["doc_id"], "")) if "doc_id" in entry else ""
        else:
            text, doc_id = item, ""
        if isinstance(text, (str, int, float)) and str(text).strip():
            out.append((str(text).strip(), doc_id or str(k)))
    return out


def _field(record: Any, entries: Union[None, str, Mapping, Sequence]) -> list[tuple[str, str]]:
    if entries is None:
        return []
    if isinstance(entries, (str, Mapping)):
        entries = [entries]
    out = []
    for e in entries:
        out.extend(_texts(record, e))
    return out


def map_record(record: Mapping, mapping: Mapping, line_no: int = 0) -> Sample:
    """Map one raw record; raises DatasetError when it cannot form a Sample."""
    unknown = set(mapping) - _MAPPING_KEYS
    if unknown:
        raise DatasetError(f"unknown mapping key(s) {sorted(unknown)}")
    if not isinstance(record, Mapping):
        raise DatasetError("record is not an object")
    raw_id = _get(record, mapping.get("id", "id"))
    sample_id = str(raw_id) if raw_id not in (_MISSING, None, "") else str(line_no)
    query = _get(record, mapping.get("query", "query"))
    if query is _MISSING or not isinstance(query, str) or not query.strip():
        if not mapping.get("query_optional"):
            raise DatasetError("missing query")
        query = ""
    he = _field(record, mapping.get("human_evidence"))
    rd = _field(record, mapping.get("reference_docs"))
    return Sample(
        id=sample_id,
        task_kind=TaskKind(mapping["task_kind"]),
        query=query.strip(),
        gold_short_answers=tuple(t for t, _ in _field(record, mapping.get("gold_short_answers"))),
        human_evidence=make_passages([t for t, _ in he], Origin.HUMAN_EVIDENCE, [d for _, d in he]),
        reference_docs=make_passages([t for t, _ in rd], Origin.REFERENCE_DOC, [d for _, d in rd]),
    )


@dataclass
class Corpus:
    samples: list[Sample]
    task_kind: Optional[TaskKind] = None
    source: str = ""
    diagnostics: list[str] = field(default_factory=list)

    @property
    def sample_count(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    def by_id(self) -> dict[str, Sample]:
        return {s.id: s for s in self.samples}


def load_mapping(spec: Union[str, Path, Mapping]) -> dict:
    """A built-in name (``nq``, ``msmarco`` ...), a JSON file path, or a dict."""
    if isinstance(spec, Mapping):
        return dict(spec)
    if str(spec) in MAPPINGS:
        return dict(MAPPINGS[str(spec)])
    with open(spec, encoding="utf-8") as f:
        return json.load(f)


def ingest(
    raw_path: Union[str, Path],
    mapping: Union[str, Path, Mapping],
    limit: Optional[int] = 200,
    task_kind: Optional[TaskKind] = None,
) -> Corpus:
    """Read the first ``limit`` well-formed records of a raw JSON-lines file.

    Malformed records and duplicate ids are skipped with a diagnostic.
    """
    spec = load_mapping(mapping)
    if task_kind is not None:
        spec["task_kind"] = TaskKind(task_kind).value
    kind = TaskKind(spec["task_kind"])
    samples: list[Sample] = []
    diagnostics: list[str] = []
    seen: set[str] = set()
    with open(raw_path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if limit is not None and len(samples) >= limit:
                break
            if not line.strip():
                continue
            try:
                sample = map_record(json.loads(line), spec, line_no)
            except (json.JSONDecodeError, DatasetError) as e:
                diagnostics.append(f"line {line_no}: skipped ({e})")
                continue
            if sample.id in seen:
                diagnostics.append(f"line {line_no}: skipped (duplicate id {sample.id!r})")
                continue
            seen.add(sample.id)
            samples.append(sample)
    if limit is not None and len(samples) < limit:
        msg = f"requested {limit} samples, only {len(samples)} available"
        logger.warning(msg)
        diagnostics.append(msg)
    for d in diagnostics:
        logger.info(d)
    return Corpus(samples, kind, str(raw_path), diagnostics)


def save_corpus(corpus: Union[Corpus, Iterable[Sample]], path: Union[str, Path]) -> None:
    samples = corpus.samples if isinstance(corpus, Corpus) else list(corpus)
    with open(path, "w", encoding="utf-8") as f:
        for s in samples:
            rec = {"schema_version": CORPUS_SCHEMA_VERSION, **s.to_dict()}
            f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def load_corpus(path: Union[str, Path]) -> Corpus:
    samples = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            version = rec.pop("schema_version", CORPUS_SCHEMA_VERSION)
            if version != CORPUS_SCHEMA_VERSION:
                raise DatasetError(f"line {line_no}: unsupported corpus schema version {version}")
            samples.append(Sample.from_dict(rec))
    problems = validate_corpus(samples)
    if problems:
        raise DatasetError(f"invalid corpus {path}: {problems[0]}")
    kinds = {s.task_kind for s in samples}
    return Corpus(samples, kinds.pop() if len(kinds) == 1 else None, str(path))


@dataclass(frozen=True)
class GoldenAnswer:
    text: str
    parts: tuple[tuple[str, str], ...] = ()
    separator: str = GOLDEN_SEPARATOR


def build_golden_answer(
    sample: Sample, separator: str = GOLDEN_SEPARATOR, diagnostics: Optional[list[str]] = None
) -> GoldenAnswer:
    """Task-specific reference text for reference-based baseline metrics."""
    kind = sample.task_kind
    answers = [("answer", a) for a in sample.gold_short_answers]
    evidence = [("evidence", p.text) for p in sample.human_evidence]
    docs = [("doc", p.text) for p in sample.reference_docs]
    if kind is TaskKind.OPEN_DOMAIN_QA:
        parts = answers
    elif kind is TaskKind.WEB_RETRIEVAL_QA:
        parts = answers + docs
    elif kind in (TaskKind.EXPERT_VALIDATED_QA, TaskKind.NEWS_FACT_GENERATION):
        parts = evidence
    else:
        # retrieval-augmented QA keeps its answer as human evidence
        parts = evidence + docs
    if not parts and diagnostics is not None:
        diagnostics.append(f"sample {sample.id}: golden answer is empty")
    return GoldenAnswer(separator.join(t for _, t in parts), tuple(parts), separator)


def _strip_title(text: str) -> str:
    line = next((ln for ln in text.strip().splitlines() if ln.strip()), "").strip()
    if line.lower().startswith("title:"):
        line = line[6:].strip()
    while len(line) >= 2 and line[0] == line[-1] and line[0] in "\"'“”‘’*":
        line = line[1:-1].strip()
    if len(line) >= 2 and line[0] in "“‘" and line[-1] in "”’":
        line = line[1:-1].strip()
    return line


def generate_title(summary: str, gateway: Gateway) -> str:
    """One-line title for a news summary, whitespace and surrounding quotes removed."""
    if not summary or not summary.strip():
        raise ValueError("summary is empty")
    return _strip_title(gateway.run(TemplateId.TITLE_GENERATION, {"document": summary}).text)


def generate_model_text(query_or_title: str, gateway: Gateway) -> str:
    return gateway.run(TemplateId.LONG_FORM_GENERATION, {"title": query_or_title}).text.strip()


def generate_corpus_texts(
    corpus: Corpus, model_gateways: Mapping[str, Gateway], title_gateway: Optional[Gateway] = None
) -> Corpus:
    """Fill in generated texts for every model; news samples get a title first.

    Failures skip the affected (sample, model) with a diagnostic.
    """
    out = []
    diagnostics = list(corpus.diagnostics)
    for s in corpus.samples:
        if s.task_kind is TaskKind.NEWS_FACT_GENERATION and not s.query and s.human_evidence:
            if title_gateway is None:
                diagnostics.append(f"{s.id}: no title gateway for news sample")
            else:
                try:
                    s = s.with_query(generate_title(s.human_evidence[0].text, title_gateway))
                except (CallError, ProtocolError) as e:
                    diagnostics.append(f"{s.id}: title generation failed ({e})")
        for model_id, gw in model_gateways.items():
            if not s.query or model_id in s.generated_texts:
                continue
            try:
                s = s.with_generated_text(model_id, generate_model_text(s.query, gw))
            except (CallError, ProtocolError) as e:
                diagnostics.append(f"{s.id}: generation for {model_id} failed ({e})")
        out.append(s)
    return Corpus(out, corpus.task_kind, corpus.source, diagnostics)


def attach_model_retrieved_docs(
    sample: Sample, model_id: str, pages: Sequence[Union[str, Passage]], chunk_limit: int = DEFAULT_CHUNK_TOKENS
) -> Sample:
    """Chunk pre-extracted page texts and store them under ``model_retrieved_docs[model_id]``."""
    if not pages:
        return sample
    passages = [
        p if isinstance(p, Passage) else Passage(text=p, origin=Origin.MODEL_RETRIEVED_DOC, doc_id=str(k), index=k)
        for k, p in enumerate(pages)
    ]
    return sample.with_model_retrieved_docs(model_id, chunk_passages(passages, chunk_limit, Origin.MODEL_RETRIEVED_DOC))
