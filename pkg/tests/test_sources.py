import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factscope.model import Origin, Stage
from factscope.sources import (
    FixtureSearchBackend,
    ScenarioError,
    SearchClient,
    SearchError,
    build_sources,
    chunk_document,
    compose_query,
    plan_scenario,
    query_digest,
    search,
)
from factscope.datasets import attach_model_retrieved_docs
from conftest import make_sample


def words(n, sentence_every=None):
    toks = [f"w{k}" for k in range(n)]
    if sentence_every:
        toks = [t + "." if (k + 1) % sentence_every == 0 else t for k, t in enumerate(toks)]
    return " ".join(toks)


def test_short_text_is_one_chunk():
    out = chunk_document(words(10), 1024)
    assert len(out) == 1 and out[0].text == words(10)


def test_long_text_chunks_respect_limit_and_cover_tokens():
    text = words(2050)
    out = chunk_document(text, 1024)
    assert len(out) == 3
    assert all(len(p.text.split()) <= 1024 for p in out)
    assert " ".join(p.text for p in out).split() == text.split()
    assert [p.index for p in out] == [0, 1, 2]


def test_empty_text():
    assert chunk_document("", 1024) == []
    assert chunk_document("   \n ", 5) == []


def test_chunk_prefers_sentence_end():
    text = "a b c. d e f g h"
    out = chunk_document(text, 5)
    assert [p.text for p in out] == ["a b c.", "d e f g h"]


def test_chunk_ignores_sentence_end_that_would_leave_chunk_tiny():
    out = chunk_document("a. b c d e f g h", 6)
    assert out[0].text == "a. b c d e f"


def test_chunk_limit_validation():
    with pytest.raises(ValueError):
        chunk_document("a", 0)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(0, 5000), limit=st.integers(1, 1500), every=st.one_of(st.none(), st.integers(1, 60)))
def test_chunk_round_trip_property(n, limit, every):
    text = words(n, every)
    out = chunk_document(text, limit)
    assert all(1 <= len(p.text.split()) <= limit for p in out)
    assert [t for p in out for t in p.text.split()] == text.split()


@pytest.mark.parametrize(
    "spec, stages",
    [
        ("se+lk", (Stage.SEARCH_PLUS_LLM,)),
        ("he", (Stage.HUMAN_EVIDENCE, Stage.SEARCH_PLUS_LLM)),
        ("rd", (Stage.REFERENCE_DOCS, Stage.SEARCH_PLUS_LLM)),
        ("he,rd,se+lk", (Stage.HUMAN_EVIDENCE, Stage.REFERENCE_DOCS, Stage.SEARCH_PLUS_LLM)),
        ("rd,he", (Stage.REFERENCE_DOCS, Stage.HUMAN_EVIDENCE, Stage.SEARCH_PLUS_LLM)),
        (" mrd , rd ", (Stage.MODEL_RETRIEVED_DOCS, Stage.REFERENCE_DOCS, Stage.SEARCH_PLUS_LLM)),
    ],
)
def test_plan_scenario(spec, stages):
    assert plan_scenario(spec).stages == stages


@pytest.mark.parametrize("spec", ["he,he", "he,xx", "se+lk,he", "rd,se+lk,rd"])
def test_plan_scenario_rejects(spec):
    with pytest.raises(ScenarioError):
        plan_scenario(spec)


def test_build_sources_order_and_content():
    s = make_sample(he=["e1", "e2"], rd=["d1"])
    diag = []
    srcs = build_sources(s, plan_scenario("he,rd"), "m", diagnostics=diag)
    assert [x.stage for x in srcs] == [Stage.HUMAN_EVIDENCE, Stage.REFERENCE_DOCS, Stage.SEARCH_PLUS_LLM]
    assert [p.text for p in srcs[0].passages] == ["e1", "e2"]
    assert srcs[2].deferred and srcs[2].passages == ()
    assert diag == []


def test_build_sources_empty_stage_diagnostic():
    diag = []
    srcs = build_sources(make_sample(he=["e"]), plan_scenario("rd"), "m", diagnostics=diag)
    assert srcs[0].passages == () and len(diag) == 1 and "rd" in diag[0]


def test_build_sources_model_retrieved_docs_are_per_model_and_chunked():
    s = attach_model_retrieved_docs(make_sample(), "bingchat", [words(1500)], chunk_limit=1024)
    srcs = build_sources(s, plan_scenario("mrd"), "bingchat", chunk_limit=1024)
    assert len(srcs[0].passages) == 2
    assert all(p.origin is Origin.MODEL_RETRIEVED_DOC for p in srcs[0].passages)
    assert " ".join(p.text for p in srcs[0].passages) == words(1500)
    assert build_sources(s, plan_scenario("mrd"), "chatgpt")[0].passages == ()


def _hits(n):
    return [{"title": f"t{k}", "snippet": f"s{k}", "url": f"u{k}"} for k in range(n)]


def test_search_passthrough_and_ranks():
    q = compose_query("When?", "Titanic")
    assert q == "Titanic When?"
    client = SearchClient(FixtureSearchBackend({q: _hits(3)}))
    out = search("When?", "Titanic", client)
    assert [s.rank for s in out] == [0, 1, 2] and out[1].snippet == "s1"


def test_fixture_backend_digest_keys():
    q = "k q"
    client = SearchClient(FixtureSearchBackend({query_digest(q): _hits(2)}))
    assert len(search("q", "k", client)) == 2


def test_search_cache(tmp_path):
    backend = FixtureSearchBackend({"k q": _hits(3)})
    client = SearchClient(backend, cache_path=tmp_path / "s.jsonl")
    search("q", "k", client)
    search("q", "k", client)
    assert backend.calls == 1 and client.backend_calls == 1
    warm = SearchClient(backend, cache_path=tmp_path / "s.jsonl")
    search("q", "k", warm)
    assert backend.calls == 1 and warm.backend_calls == 0


def test_search_truncates_to_top_k():
    client = SearchClient(FixtureSearchBackend({"k q": _hits(25)}), top_k=10)
    assert len(search("q", "k", client)) == 10


def test_search_backend_failure_is_search_error():
    class Down:
        backend_id = "down"

        def search(self, query, top_k):
            raise ConnectionError("no route")

    with pytest.raises(SearchError):
        search("q", "k", SearchClient(Down()))
