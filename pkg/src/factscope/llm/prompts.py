"""Prompt templates for every LLM-backed step, and their rendering.

Templates use ``{name}`` placeholders. Only the declared placeholder names
are substituted, so literal braces (the JSON example in the extraction
prompt) pass through untouched.
"""

from __future__ import annotations

import enum
import re
from collections.abc import Mapping, Sequence


class TemplateId(str, enum.Enum):
    FACT_UNIT_EXTRACTION = "FactUnitExtraction"
    KEYWORD_GENERATION = "KeywordGeneration"
    ANSWER_EXTRACTION_EVIDENCE = "AnswerExtractionEvidence"
    ANSWER_EXTRACTION_SEARCH_LLM = "AnswerExtractionSearchLlm"
    FACT_CONSISTENCY = "FactConsistency"
    LONG_FORM_GENERATION = "LongFormGeneration"
    TITLE_GENERATION = "TitleGeneration"


class PromptConfigError(ValueError):
    pass


_FACT_UNIT_EXTRACTION = (
    "Your task is to segment a given document into several atomic claims. For each claim, you need to "
    "generate several questions related to it and extract an answer for each question from that claim. "
    "Your output is a JSON list. Each element includes the question, the answer, and the sentence from "
    "the document containing the atomic claims.\n"
    "\n"
    "You MUST only respond in the JSON List format as described below. DO NOT RESPOND WITH ANYTHING ELSE. "
    "ADDING ANY OTHER EXTRA NOTES THAT VIOLATE THE RESPONSE FORMAT IS BANNED. "
    "START YOUR RESPONSE WITH ’[’.\n"
    "[Response Format]\n"
    '[{"question": "Informative question", "answer": "A concise phrase under 10 words", '
    '"sentence": "Sentence containing the answer."}, ...]\n'
    "\n"
    "document: {document}"
)

_KEYWORD_GENERATION = (
    "Generate keywords for the following document. Do not provide any explanations.\n"
    "\n"
    "document: {document}\n"
    "\n"
    "keywords:"
)

_ANSWER_EXTRACTION_EVIDENCE = (
    "You are an answer-extraction expert. Your task is to extract a short answer from the evidence to the "
    "question. Directly answer without any explanations. If the evidence is irrelevant to the question, "
    'respond ONLY with "NOANS".\n'
    "\n"
    "keywords: {keywords}\n"
    "\n"
    "evidence: {evidence}\n"
    "\n"
    "question: {question}\n"
    "\n"
    "your answer:"
)

_ANSWER_EXTRACTION_SEARCH_LLM = (
    "You are a question-answering expert. You are given a question, keywords, and some snippets. Your task "
    "is to output a short answer to the question based on the snippets or the knowledge you possess, while "
    "your answer is factually consistent with the given keywords. If your answer is based on the snippets, "
    "you should provide the indices of the snippets. If there is no relevant snippet, you should answer "
    "with the knowledge you possess, and the output index is [-1]. If you are uncertain about the "
    "correctness and timeliness of your answer, your answer should be formed as [NOANS] instead. An example "
    "output format: [<your answer>]; [<index1>, <index2>, …]. Your output MUST begin with "
    "‘[‘. DO NOT GIVE ANY EXPLANATIONS.\n"
    "\n"
    "question: {question}\n"
    "\n"
    "keywords: {keywords}\n"
    "\n"
    "snippets: {snippets}"
)

_FACT_CONSISTENCY = (
    "Your task is to judge whether the following two answers are factually consistent. "
    "Directly answer yes or no.\n"
    "\n"
    "Answer 1: {e_i}\n"
    "\n"
    "Answer 2: {a_i}"
)

_LONG_FORM_GENERATION = (
    "You have been presented with the following title. Your task is to provide a comprehensive "
    "introduction to the query topic with sufficient verifiable facts based on the knowledge you possess. "
    "Your output must be in English.\n"
    "\n"
    "Title: {title}\n"
    "\n"
    "Introduction:"
)

_TITLE_GENERATION = (
    "Generate a summarized title for the following document. Do not provide any explanations.\n"
    "\n"
    "document: {document}\n"
    "\n"
    "title:"
)

TEMPLATES: dict[TemplateId, str] = {
    TemplateId.FACT_UNIT_EXTRACTION: _FACT_UNIT_EXTRACTION,
    TemplateId.KEYWORD_GENERATION: _KEYWORD_GENERATION,
    TemplateId.ANSWER_EXTRACTION_EVIDENCE: _ANSWER_EXTRACTION_EVIDENCE,
    TemplateId.ANSWER_EXTRACTION_SEARCH_LLM: _ANSWER_EXTRACTION_SEARCH_LLM,
    TemplateId.FACT_CONSISTENCY: _FACT_CONSISTENCY,
    TemplateId.LONG_FORM_GENERATION: _LONG_FORM_GENERATION,
    TemplateId.TITLE_GENERATION: _TITLE_GENERATION,
}

PLACEHOLDERS: dict[TemplateId, tuple[str, ...]] = {
    TemplateId.FACT_UNIT_EXTRACTION: ("document",),
    TemplateId.KEYWORD_GENERATION: ("document",),
    TemplateId.ANSWER_EXTRACTION_EVIDENCE: ("keywords", "evidence", "question"),
    TemplateId.ANSWER_EXTRACTION_SEARCH_LLM: ("question", "keywords", "snippets"),
    TemplateId.FACT_CONSISTENCY: ("e_i", "a_i"),
    TemplateId.LONG_FORM_GENERATION: ("title",),
    TemplateId.TITLE_GENERATION: ("document",),
}

_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_]+)\}")


def render_prompt(template_id: TemplateId | str, bindings: Mapping[str, str]) -> str:
    """Instantiate a template.

    Raises:
        PromptConfigError: if a declared placeholder has no binding, or a
            binding names a placeholder the template does not have.
    """
    template_id = TemplateId(template_id)
    names = PLACEHOLDERS[template_id]
    missing = [n for n in names if n not in bindings]
    if missing:
        raise PromptConfigError(f"unbound placeholder(s) {missing} for {template_id.value}")
    extra = sorted(set(bindings) - set(names))
    if extra:
        raise PromptConfigError(f"unknown placeholder(s) {extra} for {template_id.value}")

    def sub(m: re.Match) -> str:
        name = m.group(1)
        return str(bindings[name]) if name in names else m.group(0)

    # single pass: substituted values are never rescanned
    return _PLACEHOLDER_RE.sub(sub, TEMPLATES[template_id])


def format_snippets(snippets: Sequence) -> str:
    """Render search snippets as one ``[i] title: snippet`` line each, 0-based."""
    lines = []
    for i, s in enumerate(snippets):
        title = getattr(s, "title", "") or ""
        text = getattr(s, "snippet", s if isinstance(s, str) else "")
        lines.append(f"[{i}] {title}: {text}" if title else f"[{i}] {text}")
    return "\n".join(lines)
