from __future__ import annotations

import json
import re
from pathlib import Path

import pytest

from factscope.llm import Gateway, ResponseCache, ScriptedProvider
from factscope.model import Origin, Sample, TaskKind, make_passages

FIXTURES = Path(__file__).parent / "fixtures"

_EVIDENCE_RE = re.compile(r"keywords: (.*)\n\nevidence: (.*)\n\nquestion: (.*)\n\nyour answer:$", re.S)
_SEARCH_RE = re.compile(r"question: (.*)\n\nkeywords: (.*)\n\nsnippets: (.*)$", re.S)
_JUDGE_RE = re.compile(r"Answer 1: (.*)\n\nAnswer 2: (.*)$", re.S)
_DOC_RE = re.compile(r"document: (.*)\n\n(?:keywords|title):$", re.S)
_FUE_DOC_RE = re.compile(r"document: (.*)$", re.S)
_TITLE_RE = re.compile(r"Title: (.*)\n\nIntroduction:$", re.S)


def prompt_kind(prompt: str) -> str:
    if prompt.startswith("Your task is to segment"):
        return "fue"
    if prompt.startswith("Generate keywords"):
        return "keywords"
    if prompt.startswith("You are an answer-extraction expert"):
        return "ae"
    if prompt.startswith("You are a question-answering expert"):
        return "se"
    if prompt.startswith("Your task is to judge"):
        return "fcd"
    if prompt.startswith("You have been presented"):
        return "longform"
    if prompt.startswith("Generate a summarized title"):
        return "title"
    raise AssertionError(f"unrecognised prompt: {prompt[:40]}")


class FakeLLM:
    """Answers each prompt kind from lookup tables.

    texts:    document -> (keywords, fact-unit completion)
    evidence: (evidence, question) -> answer; anything else is NOANS
    search:   question -> raw completion; default "[NOANS]"
    judge:    (claimed, extracted) -> completion; default case-insensitive equality
    """

    def __init__(self, texts=None, evidence=None, search=None, judge=None, titles=None, longform=None):
        self.texts = texts or {}
        self.evidence = evidence or {}
        self.search = search or {}
        self.judge = judge or {}
        self.titles = titles or {}
        self.longform = longform or {}

    def __call__(self, prompt: str) -> str:
        kind = prompt_kind(prompt)
        if kind == "keywords":
            doc = _DOC_RE.search(prompt).group(1)
            return self.texts[doc][0]
        if kind == "fue":
            doc = _FUE_DOC_RE.search(prompt).group(1)
            return self.texts[doc][1]
        if kind == "ae":
            _, ev, q = _EVIDENCE_RE.search(prompt).groups()
            return self.evidence.get((ev, q), "NOANS")
        if kind == "se":
            q = _SEARCH_RE.search(prompt).group(1)
            return self.search.get(q, "[NOANS]")
        if kind == "fcd":
            e, a = _JUDGE_RE.search(prompt).groups()
            if (e, a) in self.judge:
                return self.judge[(e, a)]
            return "yes" if e.strip().lower() == a.strip().lower() else "no"
        if kind == "title":
            return self.titles[_DOC_RE.search(prompt).group(1)]
        return self.longform[_TITLE_RE.search(prompt).group(1)]


def units_json(*triples) -> str:
    return json.dumps([{"question": q, "answer": a, "sentence": s} for q, a, s in triples])


def make_sample(sid="s1", he=(), rd=(), texts=None, kind=TaskKind.RETRIEVAL_AUGMENTED_QA, query="q?") -> Sample:
    return Sample(
        id=sid,
        task_kind=kind,
        query=query,
        human_evidence=make_passages(he, Origin.HUMAN_EVIDENCE),
        reference_docs=make_passages(rd, Origin.REFERENCE_DOC),
        generated_texts=dict(texts or {}),
    )


def count_kind(provider: ScriptedProvider, kind: str) -> int:
    return sum(1 for p in provider.prompts if prompt_kind(p) == kind)


@pytest.fixture
def scripted():
    """Factory: FakeLLM tables -> (provider, gateway)."""

    def build(cache_path=None, **tables):
        provider = ScriptedProvider(FakeLLM(**tables))
        gw = Gateway(provider, ResponseCache(cache_path) if cache_path else ResponseCache())
        return provider, gw

    return build


# Three-sample corpus scripted to score exactly 2/3, 1 and 1/2 under "he,rd".
E2E_MODEL = "chatgpt"
E2E_SCENARIO = "he,rd"
_T1 = "The Titanic sank in 1912. It left from Southampton. It had four funnels."
_T2 = "Oxfam runs charity shops. Oxfam sells vinyl."
_T3 = "Paris is in France. The Seine flows there. It has 20 districts. The Louvre is a museum."


def e2e_tables() -> dict:
    return dict(
        texts={
            _T1: ("Titanic", units_json(("When did it sink?", "1912", "s1"), ("Where did it leave from?", "Southampton", "s2"), ("How many funnels?", "four", "s3"))),
            _T2: ("Oxfam", units_json(("What does Oxfam run?", "charity shops", "s1"), ("What does Oxfam sell?", "vinyl", "s2"))),
            _T3: ("Paris", units_json(("Where is Paris?", "France", "s1"), ("What river flows there?", "Seine", "s2"), ("How many districts?", "20", "s3"), ("What is the Louvre?", "a museum", "s4"))),
        },
        evidence={
            ("Titanic sank in 1912 after leaving Southampton.", "When did it sink?"): "1912",
            ("Titanic sank in 1912 after leaving Southampton.", "Where did it leave from?"): "Southampton",
            ("It had three working funnels and a dummy.", "How many funnels?"): "three",
            ("Oxfam runs charity shops selling vinyl.", "What does Oxfam run?"): "charity shops",
            ("Oxfam runs charity shops selling vinyl.", "What does Oxfam sell?"): "vinyl",
            ("Paris is the capital of France.", "Where is Paris?"): "France",
            ("The Loire is a river.", "What river flows there?"): "Loire",
        },
        search={"What is the Louvre?": "[a museum]; [0]", "How many districts?": "[NOANS]"},
    )


E2E_SEARCH = {
    "Paris How many districts?": [{"title": "Paris", "snippet": "Paris facts", "url": "u0"}],
    "Paris What is the Louvre?": [{"title": "Louvre", "snippet": "The Louvre is a museum.", "url": "u1"}],
}


def e2e_samples() -> list[Sample]:
    return [
        make_sample("s1", he=["Titanic sank in 1912 after leaving Southampton."], rd=["It had three working funnels and a dummy."], texts={E2E_MODEL: _T1}),
        make_sample("s2", he=["Oxfam runs charity shops selling vinyl."], texts={E2E_MODEL: _T2}),
        make_sample("s3", he=["Paris is the capital of France."], rd=["The Loire is a river."], texts={E2E_MODEL: _T3}),
    ]


def build_e2e(root: Path) -> dict:
    """Write corpus, mock-provider fixture and search fixture for an offline CLI run.

    The mock fixture is recorded by running the pipeline once against the
    lookup-table fake and storing every prompt digest with its reply.
    """
    from factscope.datasets import save_corpus
    from factscope.llm import prompt_digest
    from factscope.pipeline import evaluate_corpus
    from factscope.sources import FixtureSearchBackend, SearchClient, plan_scenario

    fake = FakeLLM(**e2e_tables())
    provider = ScriptedProvider(fake)
    evaluate_corpus(
        e2e_samples(), [E2E_MODEL], plan_scenario(E2E_SCENARIO), SearchClient(FixtureSearchBackend(E2E_SEARCH)), Gateway(provider)
    )
    mock = {prompt_digest(p): fake(p) for p in provider.prompts}
    paths = {
        "corpus": root / "corpus.jsonl",
        "mock": root / "mock.json",
        "search": root / "search.json",
        "cache": root / "cache",
    }
    save_corpus(e2e_samples(), paths["corpus"])
    paths["mock"].write_text(json.dumps(mock, indent=1, sort_keys=True), encoding="utf-8")
    paths["search"].write_text(json.dumps(E2E_SEARCH, indent=1), encoding="utf-8")
    return paths


def e2e_run_argv(paths: dict, out: Path, *extra: str) -> list[str]:
    return [
        "run",
        "--corpus", str(paths["corpus"]),
        "--out", str(out),
        "--provider", f"mock:{paths['mock']}",
        "--search", f"fixture:{paths['search']}",
        "--scenario", E2E_SCENARIO,
        "--cache-dir", str(paths["cache"]),
        *extra,
    ]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
