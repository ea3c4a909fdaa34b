"""Domain types shared across the toolkit."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional


class TaskKind(str, enum.Enum):
    OPEN_DOMAIN_QA = "OpenDomainQA"
    WEB_RETRIEVAL_QA = "WebRetrievalQA"
    EXPERT_VALIDATED_QA = "ExpertValidatedQA"
    NEWS_FACT_GENERATION = "NewsFactGeneration"
    RETRIEVAL_AUGMENTED_QA = "RetrievalAugmentedQA"


class Origin(str, enum.Enum):
    HUMAN_EVIDENCE = "HumanEvidence"
    REFERENCE_DOC = "ReferenceDoc"
    MODEL_RETRIEVED_DOC = "ModelRetrievedDoc"
    SEARCH_SNIPPET = "SearchSnippet"


class Stage(str, enum.Enum):
    """A fact-source kind, in the short form used by scenario strings."""

    HUMAN_EVIDENCE = "he"
    REFERENCE_DOCS = "rd"
    MODEL_RETRIEVED_DOCS = "mrd"
    SEARCH_PLUS_LLM = "se+lk"


@dataclass(frozen=True)
class Passage:
    text: str
    origin: Origin
    doc_id: str = ""
    index: int = 0

    def to_dict(self) -> dict:
        return {"text": self.text, "origin": self.origin.value, "doc_id": self.doc_id, "index": self.index}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Passage":
        return cls(text=d["text"], origin=Origin(d["origin"]), doc_id=d.get("doc_id", ""), index=int(d.get("index", 0)))


def make_passages(texts: Iterable[str], origin: Origin, doc_ids: Optional[Iterable[str]] = None) -> tuple[Passage, ...]:
    """Wrap raw texts as an ordered passage list with positional indices."""
    texts = list(texts)
    ids = list(doc_ids) if doc_ids is not None else [""] * len(texts)
    return tuple(Passage(text=t, origin=origin, doc_id=i, index=k) for k, (t, i) in enumerate(zip(texts, ids)))


@dataclass(frozen=True)
class Sample:
    id: str
    task_kind: TaskKind
    query: str
    gold_short_answers: tuple[str, ...] = ()
    human_evidence: tuple[Passage, ...] = ()
    reference_docs: tuple[Passage, ...] = ()
    model_retrieved_docs: Mapping[str, tuple[Passage, ...]] = field(default_factory=dict)
    generated_texts: Mapping[str, str] = field(default_factory=dict)

    def with_generated_text(self, model_id: str, text: str) -> "Sample":
        texts = dict(self.generated_texts)
        texts[model_id] = text
        return _replace(self, generated_texts=texts)

    def with_model_retrieved_docs(self, model_id: str, passages: Iterable[Passage]) -> "Sample":
        docs = dict(self.model_retrieved_docs)
        docs[model_id] = tuple(passages)
        return _replace(self, model_retrieved_docs=docs)

    def with_query(self, query: str) -> "Sample":
        return _replace(self, query=query)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "task_kind": self.task_kind.value,
            "query": self.query,
            "gold_short_answers": list(self.gold_short_answers),
            "human_evidence": [p.to_dict() for p in self.human_evidence],
            "reference_docs": [p.to_dict() for p in self.reference_docs],
            "model_retrieved_docs": {
                m: [p.to_dict() for p in ps] for m, ps in sorted(self.model_retrieved_docs.items())
            },
            "generated_texts": dict(sorted(self.generated_texts.items())),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Sample":
        return cls(
            id=str(d["id"]),
            task_kind=TaskKind(d["task_kind"]),
            query=d.get("query", ""),
            gold_short_answers=tuple(d.get("gold_short_answers", ())),
            human_evidence=tuple(Passage.from_dict(p) for p in d.get("human_evidence", ())),
            reference_docs=tuple(Passage.from_dict(p) for p in d.get("reference_docs", ())),
            model_retrieved_docs={
                m: tuple(Passage.from_dict(p) for p in ps) for m, ps in d.get("model_retrieved_docs", {}).items()
            },
            generated_texts=dict(d.get("generated_texts", {})),
        )


def _replace(sample: Sample, **changes) -> Sample:
    from dataclasses import replace

    return replace(sample, **changes)


@dataclass(frozen=True)
class Keywords:
    value: str

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class FactUnit:
    question: str
    claimed_answer: str
    source_sentence: str = ""

    def to_dict(self) -> dict:
        return {"question": self.question, "answer": self.claimed_answer, "sentence": self.source_sentence}


@dataclass(frozen=True)
class Scenario:
    stages: tuple[Stage, ...]
    name: str = ""

    def __post_init__(self):
        if not self.stages or self.stages[-1] is not Stage.SEARCH_PLUS_LLM:
            raise ValueError("scenario must end with the se+lk stage")
        if len(set(self.stages)) != len(self.stages):
            raise ValueError("scenario stages must not repeat")
        if not self.name:
            object.__setattr__(self, "name", ",".join(s.value for s in self.stages))


@dataclass(frozen=True)
class VerificationOutcome:
    """Result of verifying one fact unit.

    ``resolved_index`` is the passage index for evidence stages; for the
    search stage it is the first cited snippet index, or -1 when the answer
    came from the model's own knowledge.
    """

    fact_unit: FactUnit
    extracted_answer: Optional[str] = None
    resolved_stage: Optional[Stage] = None
    resolved_index: Optional[int] = None
    provenance: tuple[int, ...] = ()
    consistency: int = 0

    @property
    def unverifiable(self) -> bool:
        return self.extracted_answer is None

    def __post_init__(self):
        if self.consistency not in (0, 1):
            raise ValueError("consistency must be 0 or 1")
        if self.extracted_answer is None:
            if self.consistency != 0:
                raise ValueError("an unverifiable outcome cannot be consistent")
            if self.resolved_stage is not None:
                raise ValueError("unverifiable outcome has no resolved stage")
        elif self.resolved_stage is None:
            raise ValueError("a resolved answer needs its stage")

    def to_dict(self) -> dict:
        return {
            "question": self.fact_unit.question,
            "claimed_answer": self.fact_unit.claimed_answer,
            "sentence": self.fact_unit.source_sentence,
            "extracted_answer": self.extracted_answer,
            "stage": self.resolved_stage.value if self.resolved_stage else None,
            "index": self.resolved_index,
            "provenance": list(self.provenance),
            "consistency": self.consistency,
            "unverifiable": self.unverifiable,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "VerificationOutcome":
        return cls(
            fact_unit=FactUnit(d["question"], d["claimed_answer"], d.get("sentence", "")),
            extracted_answer=d.get("extracted_answer"),
            resolved_stage=Stage(d["stage"]) if d.get("stage") else None,
            resolved_index=d.get("index"),
            provenance=tuple(d.get("provenance", ())),
            consistency=int(d.get("consistency", 0)),
        )


@dataclass(frozen=True)
class SampleScore:
    """Mean consistency over the counted fact units, kept as an exact rational."""

    fraction: Fraction
    fact_count: int
    outcomes: tuple[VerificationOutcome, ...] = ()

    @property
    def value(self) -> float:
        return float(self.fraction)


# model id -> per-sample scores in [0, 1]
ScoreMatrix = dict[str, list[float]]


def validate_passages(passages: Iterable[Passage], where: str) -> list[str]:
    problems = []
    for k, p in enumerate(passages):
        if not p.text or not p.text.strip():
            problems.append(f"passage text empty at {where}[{k}]")
        if p.index != k:
            problems.append(f"passage index {p.index} != position at {where}[{k}]")
    return problems


def validate_sample(sample: Sample) -> list[str]:
    """Return human-readable invariant violations; empty when the sample is well formed."""
    problems = []
    if not sample.id:
        problems.append("id empty")
    if not isinstance(sample.task_kind, TaskKind):
        problems.append("task_kind invalid")
    for name in ("human_evidence", "reference_docs"):
        value = getattr(sample, name)
        if value is None:
            problems.append(f"{name} absent")
        else:
            problems.extend(validate_passages(value, name))
    for model_id, passages in sample.model_retrieved_docs.items():
        problems.extend(validate_passages(passages, f"model_retrieved_docs[{model_id}]"))
    return problems


def validate_corpus(samples: Iterable[Sample]) -> list[str]:
    problems = []
    seen = set()
    for s in samples:
        if s.id in seen:
            problems.append(f"duplicate id {s.id!r}")
        seen.add(s.id)
        problems.extend(f"{s.id}: {p}" for p in validate_sample(s))
    return problems
