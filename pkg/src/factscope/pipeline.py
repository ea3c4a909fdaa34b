"""Fact unit extraction, sequential answer extraction, consistency judging, and scoring."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .llm import (
    CallError,
    Gateway,
    ParseError,
    ProtocolError,
    SearchLlmAnswer,
    TemplateId,
    check_records,
    format_snippets,
    is_noans,
    parse_json_array,
    parse_search_llm_answer,
    parse_yes_no,
)
from .model import FactUnit, Keywords, Passage, Sample, SampleScore, Scenario, Stage, VerificationOutcome
from .sources import DEFAULT_CHUNK_TOKENS, FactSource, SearchClient, SearchError, build_sources, search

logger = logging.getLogger(__name__)

_GATEWAY_ERRORS = (CallError, ProtocolError)


class ExtractionFailed(RuntimeError):
    """Fact units could not be parsed from the extraction completion."""


class EmptyScore(ValueError):
    """No counted fact units, so the mean is undefined."""


@dataclass(frozen=True)
class PipelineConfig:
    chunk_limit: int = DEFAULT_CHUNK_TOKENS
    extraction_reprompts: int = 2
    parse_reprompts: int = 1
    passage_cap: Optional[int] = None
    exclude_unverifiable: bool = False


def _note(diagnostics: Optional[list[str]], msg: str) -> None:
    logger.debug(msg)
    if diagnostics is not None:
        diagnostics.append(msg)


def extract_fact_units(
    generated_text: str,
    gateway: Gateway,
    *,
    reprompts: int = 2,
    diagnostics: Optional[list[str]] = None,
) -> tuple[Keywords, list[FactUnit]]:
    """Keywords plus deduplicated fact units for one generated text.

    Raises:
        ExtractionFailed: no parseable JSON list after ``reprompts`` retries.
    """
    if not generated_text or not generated_text.strip():
        raise ValueError("generated text is empty")

    try:
        kw = gateway.run(TemplateId.KEYWORD_GENERATION, {"document": generated_text}).text.strip()
    except _GATEWAY_ERRORS as e:
        _note(diagnostics, f"keyword generation failed: {e}")
        kw = ""

    records = None
    for attempt in range(reprompts + 1):
        try:
            res = gateway.run(TemplateId.FACT_UNIT_EXTRACTION, {"document": generated_text}, reprompt=attempt)
        except _GATEWAY_ERRORS as e:
            raise ExtractionFailed(f"fact unit extraction call failed: {e}") from e
        try:
            records = parse_json_array(res.text)
            break
        except ParseError:
            _note(diagnostics, f"fact unit extraction unparseable (attempt {attempt + 1})")
    if records is None:
        raise ExtractionFailed("EXTRACTION_FAILED: no JSON list in fact unit extraction output")

    units: list[FactUnit] = []
    seen = set()
    for k, rec in enumerate(records):
        problems = check_records([rec])
        if problems:
            _note(diagnostics, f"dropped fact record {k}: {problems[0].split(' ', 2)[-1]}")
            continue
        key = (rec["question"].strip(), rec["answer"].strip())
        if key in seen:
            continue
        seen.add(key)
        units.append(FactUnit(key[0], key[1], rec["sentence"].strip()))
    return Keywords(kw), units


def extract_answer_evidence(
    keywords: Keywords | str,
    passage: Passage | str,
    question: str,
    gateway: Gateway,
    *,
    diagnostics: Optional[list[str]] = None,
) -> Optional[str]:
    """Answer ``question`` from one passage; None when the model replies NOANS."""
    evidence = passage.text if isinstance(passage, Passage) else passage
    try:
        res = gateway.run(
            TemplateId.ANSWER_EXTRACTION_EVIDENCE,
            {"keywords": str(keywords), "evidence": evidence, "question": question},
        )
    except _GATEWAY_ERRORS as e:
        _note(diagnostics, f"answer extraction failed, treated as NOANS: {e}")
        return None
    text = res.text.strip()
    if not text or is_noans(text):
        return None
    return text


def extract_answer_search_llm(
    question: str,
    keywords: Keywords | str,
    snippets: Sequence,
    gateway: Gateway,
    *,
    reprompts: int = 1,
    diagnostics: Optional[list[str]] = None,
) -> SearchLlmAnswer:
    """Answer from snippets or, failing that, from the model's own knowledge (index -1)."""
    bindings = {"question": question, "keywords": str(keywords), "snippets": format_snippets(snippets)}
    parsed = None
    for attempt in range(reprompts + 1):
        try:
            res = gateway.run(TemplateId.ANSWER_EXTRACTION_SEARCH_LLM, bindings, reprompt=attempt)
        except _GATEWAY_ERRORS as e:
            _note(diagnostics, f"search+llm answer extraction failed: {e}")
            return SearchLlmAnswer(None)
        try:
            parsed = parse_search_llm_answer(res.text)
            break
        except ParseError as e:
            _note(diagnostics, f"search+llm answer unparseable (attempt {attempt + 1}): {e}")
    if parsed is None:
        return SearchLlmAnswer(None)
    if parsed.answer is None or parsed.internal:
        return parsed
    valid = tuple(i for i in parsed.snippet_indices if i < len(snippets))
    if len(valid) != len(parsed.snippet_indices):
        _note(diagnostics, f"dropped out-of-range snippet indices from {list(parsed.snippet_indices)}")
    return SearchLlmAnswer(parsed.answer, valid or (-1,))


def verify_fact_unit(
    fact_unit: FactUnit,
    keywords: Keywords | str,
    sources: Sequence[FactSource],
    search_client: Optional[SearchClient],
    gateway: Gateway,
    *,
    passage_cap: Optional[int] = None,
    reprompts: int = 1,
    diagnostics: Optional[list[str]] = None,
) -> VerificationOutcome:
    """Walk the sources in order and stop at the first extracted answer.

    Within an evidence source passages are tried in order; a source with no
    answer hands over to the next one. The returned outcome carries the
    answer and where it was found; consistency is left at 0 for the judge.
    """
    q = fact_unit.question
    for source in sources:
        if source.stage is Stage.SEARCH_PLUS_LLM:
            snippets = []
            if search_client is None:
                _note(diagnostics, "no search client; answering from model knowledge only")
            else:
                try:
                    snippets = search(q, str(keywords), search_client)
                except SearchError as e:
                    _note(diagnostics, f"search failed, answering from model knowledge only: {e}")
            got = extract_answer_search_llm(q, keywords, snippets, gateway, reprompts=reprompts, diagnostics=diagnostics)
            if got.answer is not None:
                return VerificationOutcome(
                    fact_unit,
                    extracted_answer=got.answer,
                    resolved_stage=source.stage,
                    resolved_index=got.snippet_indices[0],
                    provenance=got.snippet_indices,
                )
            continue
        passages = source.passages if passage_cap is None else source.passages[:passage_cap]
        for j, passage in enumerate(passages):
            answer = extract_answer_evidence(keywords, passage, q, gateway, diagnostics=diagnostics)
            if answer is not None:
                return VerificationOutcome(
                    fact_unit, extracted_answer=answer, resolved_stage=source.stage, resolved_index=j, provenance=(j,)
                )
    return VerificationOutcome(fact_unit)


def judge_consistency(
    claimed: str,
    extracted: str,
    gateway: Gateway,
    *,
    reprompts: int = 1,
    diagnostics: Optional[list[str]] = None,
) -> int:
    """1 if the judge says the two answers agree, else 0 (also 0 when it never gives a yes/no)."""
    for attempt in range(reprompts + 1):
        try:
            res = gateway.run(TemplateId.FACT_CONSISTENCY, {"e_i": claimed, "a_i": extracted}, reprompt=attempt)
        except _GATEWAY_ERRORS as e:
            _note(diagnostics, f"consistency judge failed, scored 0: {e}")
            return 0
        bit = parse_yes_no(res.text)
        if bit is not None:
            return bit
        _note(diagnostics, f"consistency judge gave no yes/no (attempt {attempt + 1}): {res.text.strip()[:60]!r}")
    _note(diagnostics, "consistency judge undecided, scored 0")
    return 0


def score_sample(outcomes: Iterable[VerificationOutcome], *, exclude_unverifiable: bool = False) -> SampleScore:
    """Exact mean of consistency bits; unverifiable units count as 0 unless excluded."""
    outcomes = tuple(outcomes)
    counted = [o for o in outcomes if not (exclude_unverifiable and o.unverifiable)]
    if not counted:
        raise EmptyScore("no fact units to score")
    hits = sum(o.consistency for o in counted)
    return SampleScore(Fraction(hits, len(counted)), len(counted), outcomes)


@dataclass
class SampleResult:
    sample_id: str
    model_id: str
    scenario: str
    status: str = "ok"
    keywords: str = ""
    fact_units: list[FactUnit] = field(default_factory=list)
    outcomes: list[VerificationOutcome] = field(default_factory=list)
    score: Optional[SampleScore] = None
    diagnostics: list[str] = field(default_factory=list)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.sample_id, self.model_id, self.scenario)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "model_id": self.model_id,
            "scenario": self.scenario,
            "status": self.status,
            "keywords": self.keywords,
            "fact_units": [u.to_dict() for u in self.fact_units],
            "outcomes": [o.to_dict() for o in self.outcomes],
            "score": self.score.value if self.score else None,
            "score_fraction": str(self.score.fraction) if self.score else None,
            "fact_count": self.score.fact_count if self.score else 0,
            "diagnostics": list(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SampleResult":
        outcomes = [VerificationOutcome.from_dict(o) for o in d.get("outcomes", [])]
        score = None
        if d.get("score_fraction") is not None:
            score = SampleScore(Fraction(d["score_fraction"]), int(d["fact_count"]), tuple(outcomes))
        return cls(
            sample_id=d["sample_id"],
            model_id=d["model_id"],
            scenario=d["scenario"],
            status=d.get("status", "ok"),
            keywords=d.get("keywords", ""),
            fact_units=[FactUnit(u["question"], u["answer"], u.get("sentence", "")) for u in d.get("fact_units", [])],
            outcomes=outcomes,
            score=score,
            diagnostics=list(d.get("diagnostics", [])),
        )


def evaluate_sample(
    sample: Sample,
    model_id: str,
    scenario: Scenario,
    search_client: Optional[SearchClient],
    gateway: Gateway,
    config: PipelineConfig = PipelineConfig(),
) -> SampleResult:
    """Run extraction, verification, judging and scoring for one generated text."""
    result = SampleResult(sample.id, model_id, scenario.name)
    diag = result.diagnostics
    text = sample.generated_texts.get(model_id)
    if not text or not text.strip():
        result.status = "missing_text"
        diag.append(f"no generated text for model {model_id}")
        return result
    try:
        keywords, units = extract_fact_units(text, gateway, reprompts=config.extraction_reprompts, diagnostics=diag)
    except ExtractionFailed as e:
        result.status = "extraction_failed"
        diag.append(str(e))
        return result
    result.keywords = keywords.value
    result.fact_units = units

    sources = build_sources(sample, scenario, model_id, config.chunk_limit, diagnostics=diag)
    for unit in units:
        outcome = verify_fact_unit(
            unit,
            keywords,
            sources,
            search_client,
            gateway,
            passage_cap=config.passage_cap,
            reprompts=config.parse_reprompts,
            diagnostics=diag,
        )
        if not outcome.unverifiable:
            bit = judge_consistency(
                unit.claimed_answer, outcome.extracted_answer, gateway, reprompts=config.parse_reprompts, diagnostics=diag
            )
            outcome = VerificationOutcome(
                unit,
                extracted_answer=outcome.extracted_answer,
                resolved_stage=outcome.resolved_stage,
                resolved_index=outcome.resolved_index,
                provenance=outcome.provenance,
                consistency=bit,
            )
        result.outcomes.append(outcome)

    try:
        result.score = score_sample(result.outcomes, exclude_unverifiable=config.exclude_unverifiable)
    except EmptyScore:
        result.status = "no_fact_units"
        diag.append("no scorable fact units; sample excluded")
    return result


def evaluate_corpus(
    samples: Sequence[Sample],
    model_ids: Sequence[str],
    scenario: Scenario,
    search_client: Optional[SearchClient],
    gateway: Gateway,
    config: PipelineConfig = PipelineConfig(),
    *,
    workers: int = 1,
    skip: Iterable[tuple[str, str, str]] = (),
    on_result=None,
) -> list[SampleResult]:
    """Evaluate every (sample, model) pair; results come back sorted by (sample, model).

    ``on_result`` is called as each pair finishes, so callers can persist
    progress incrementally.
    """
    skip = set(skip)
    jobs = [
        (s, m)
        for s in samples
        for m in model_ids
        if m in s.generated_texts and (s.id, m, scenario.name) not in skip
    ]

    def work(job):
        s, m = job
        r = evaluate_sample(s, m, scenario, search_client, gateway, config)
        if on_result is not None:
            on_result(r)
        return r

    if workers <= 1:
        results = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, jobs))
    return sorted(results, key=lambda r: r.key)
