"""Factuality evaluation of generated text against ordered, pluggable fact sources."""

__version__ = "0.1.0"

from .model import (
    FactUnit,
    Keywords,
    Origin,
    Passage,
    Sample,
    SampleScore,
    Scenario,
    Stage,
    TaskKind,
    VerificationOutcome,
    validate_corpus,
    validate_sample,
)
from .pipeline import (
    PipelineConfig,
    SampleResult,
    evaluate_corpus,
    evaluate_sample,
    extract_answer_evidence,
    extract_answer_search_llm,
    extract_fact_units,
    judge_consistency,
    score_sample,
    verify_fact_unit,
)
from .sources import FactSource, SearchClient, SearchSnippet, build_sources, chunk_document, plan_scenario, search
from .stats import DpConfig, DpCurve, ResampleMode, bootstrap_mean, dp_curve, factuality_table, pearson, spearman
