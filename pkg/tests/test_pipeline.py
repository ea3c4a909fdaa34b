from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from factscope.llm import Gateway, ResponseCache, ScriptedProvider
from factscope.model import FactUnit, Stage, VerificationOutcome
from factscope.pipeline import (
    EmptyScore,
    ExtractionFailed,
    evaluate_corpus,
    evaluate_sample,
    extract_answer_evidence,
    extract_answer_search_llm,
    extract_fact_units,
    judge_consistency,
    score_sample,
    verify_fact_unit,
)
from factscope.sources import FixtureSearchBackend, SearchClient, SearchSnippet, build_sources, plan_scenario
from conftest import count_kind, make_sample, units_json

TEXT = "X was born in 1912. X lived in Paris."


def _gw(fn):
    provider = ScriptedProvider(fn)
    return provider, Gateway(provider, ResponseCache())


def test_extract_single_unit(scripted):
    _, gw = scripted(texts={TEXT: ("X", units_json(("When was X born?", "1912", "X was born in 1912.")))})
    kw, units = extract_fact_units(TEXT, gw)
    assert kw.value == "X"
    assert units == [FactUnit("When was X born?", "1912", "X was born in 1912.")]


def test_record_missing_answer_is_dropped(scripted):
    recs = [(f"q{k}", f"a{k}", f"s{k}") for k in range(6)]
    payload = units_json(*recs).replace('"answer": "a3", ', "")
    _, gw = scripted(texts={TEXT: ("X", payload)})
    diag = []
    _, units = extract_fact_units(TEXT, gw, diagnostics=diag)
    assert len(units) == 5 and [u.question for u in units] == ["q0", "q1", "q2", "q4", "q5"]
    assert diag == ["dropped fact record 3: missing 'answer'"]


def test_duplicate_units_keep_first(scripted):
    payload = units_json(("q", "a", "s1"), ("q", "a", "s2"), ("q", "b", "s3"))
    _, gw = scripted(texts={TEXT: ("X", payload)})
    _, units = extract_fact_units(TEXT, gw)
    assert [u.source_sentence for u in units] == ["s1", "s3"]


def test_extraction_reprompts_then_fails():
    provider, gw = _gw(lambda p: "kw" if p.startswith("Generate keywords") else "sorry, no list")
    with pytest.raises(ExtractionFailed):
        extract_fact_units(TEXT, gw, reprompts=2)
    assert count_kind(provider, "fue") == 3


def test_extraction_recovers_on_reprompt():
    answers = iter(["nope", units_json(("q", "a", "s"))])
    provider, gw = _gw(lambda p: "kw" if p.startswith("Generate keywords") else next(answers))
    _, units = extract_fact_units(TEXT, gw)
    assert len(units) == 1 and count_kind(provider, "fue") == 2


def test_empty_text_rejected(scripted):
    _, gw = scripted()
    with pytest.raises(ValueError):
        extract_fact_units("  ", gw)


@pytest.mark.parametrize("reply, expected", [("1912", "1912"), ("NOANS", None), (" noans ", None), ("[NOANS]", None)])
def test_extract_answer_evidence(reply, expected):
    _, gw = _gw(lambda p: reply)
    assert extract_answer_evidence("X", "X was born in 1912", "When was X born?", gw) == expected


def _snips(n):
    return [SearchSnippet(f"t{k}", f"s{k}", "", k) for k in range(n)]


def test_search_llm_with_snippet_provenance():
    _, gw = _gw(lambda p: "[Paris]; [1]")
    got = extract_answer_search_llm("Where?", "X", _snips(3), gw)
    assert (got.answer, got.snippet_indices) == ("Paris", (1,))


def test_search_llm_noans():
    _, gw = _gw(lambda p: "[NOANS]")
    assert extract_answer_search_llm("Where?", "X", _snips(3), gw).answer is None


def test_search_llm_internal_knowledge():
    provider, gw = _gw(lambda p: "[42]; [-1]")
    got = extract_answer_search_llm("Q", "X", [], gw)
    assert got.answer == "42" and got.internal
    assert provider.prompts[0].endswith("snippets: ")


def test_search_llm_unparseable_after_reprompt():
    provider, gw = _gw(lambda p: "Paris")
    diag = []
    assert extract_answer_search_llm("Q", "X", _snips(1), gw, diagnostics=diag).answer is None
    assert provider.calls == 2 and len(diag) == 2


def test_search_llm_out_of_range_indices_dropped():
    _, gw = _gw(lambda p: "[Paris]; [0, 7]")
    diag = []
    got = extract_answer_search_llm("Q", "X", _snips(2), gw, diagnostics=diag)
    assert got.snippet_indices == (0,) and diag


UNIT = FactUnit("Where is it?", "Paris")


def test_short_circuit_across_stages(scripted):
    sample = make_sample(he=["e0", "e1"], rd=["r0", "r1"])
    provider, gw = scripted(evidence={("r0", UNIT.question): "Paris"})
    backend = FixtureSearchBackend({})
    sources = build_sources(sample, plan_scenario("he,rd"), "m")
    out = verify_fact_unit(UNIT, "kw", sources, SearchClient(backend), gw)
    assert (out.extracted_answer, out.resolved_stage, out.resolved_index) == ("Paris", Stage.REFERENCE_DOCS, 0)
    assert count_kind(provider, "ae") == 3 and count_kind(provider, "se") == 0 and backend.calls == 0


def test_first_passage_hit_queries_nothing_else(scripted):
    sample = make_sample(he=["e0", "e1"], rd=["r0"])
    provider, gw = scripted(evidence={("e0", UNIT.question): "1912"})
    backend = FixtureSearchBackend({})
    out = verify_fact_unit(UNIT, "kw", build_sources(sample, plan_scenario("he,rd"), "m"), SearchClient(backend), gw)
    assert out.extracted_answer == "1912" and provider.calls == 1 and backend.calls == 0


def test_all_stages_exhausted_is_unverifiable(scripted):
    sample = make_sample(he=["e0"], rd=["r0"])
    provider, gw = scripted()
    backend = FixtureSearchBackend({"kw Where is it?": [{"title": "t", "snippet": "s"}]})
    out = verify_fact_unit(UNIT, "kw", build_sources(sample, plan_scenario("he,rd"), "m"), SearchClient(backend), gw)
    assert out.unverifiable
    assert count_kind(provider, "ae") == 2 and count_kind(provider, "se") == 1 and backend.calls == 1


def test_search_stage_without_client_uses_knowledge(scripted):
    provider, gw = scripted(search={UNIT.question: "[Paris]; [-1]"})
    diag = []
    out = verify_fact_unit(UNIT, "kw", build_sources(make_sample(), plan_scenario("se+lk"), "m"), None, gw, diagnostics=diag)
    assert out.extracted_answer == "Paris" and out.provenance == (-1,) and diag


def test_passage_cap(scripted):
    sample = make_sample(he=["e0", "e1", "e2"])
    provider, gw = scripted(evidence={("e2", UNIT.question): "Paris"})
    out = verify_fact_unit(UNIT, "kw", build_sources(sample, plan_scenario("he"), "m"), None, gw, passage_cap=2)
    assert count_kind(provider, "ae") == 2 and out.unverifiable


def test_removing_later_stage_keeps_earlier_resolution(scripted):
    sample = make_sample(he=["e0"], rd=["r0"])
    _, gw = scripted(evidence={("e0", UNIT.question): "Paris", ("r0", UNIT.question): "Lyon"})
    full = verify_fact_unit(UNIT, "kw", build_sources(sample, plan_scenario("he,rd"), "m"), None, gw)
    short = verify_fact_unit(UNIT, "kw", build_sources(sample, plan_scenario("he"), "m"), None, gw)
    assert full == short


@pytest.mark.parametrize("reply, bit", [("yes", 1), ("No.", 0), ("Yes, they are consistent.", 1)])
def test_judge(reply, bit):
    _, gw = _gw(lambda p: reply)
    assert judge_consistency("a", "b", gw) == bit


def test_judge_undecided_is_zero():
    provider, gw = _gw(lambda p: "maybe")
    diag = []
    assert judge_consistency("a", "b", gw, diagnostics=diag) == 0
    assert provider.calls == 2 and diag[-1] == "consistency judge undecided, scored 0"


def test_judge_sees_only_the_two_answers():
    provider, gw = _gw(lambda p: "yes")
    judge_consistency("1912", "April 1912", gw)
    assert provider.prompts[0].endswith("Answer 1: 1912\n\nAnswer 2: April 1912")


def _outcomes(bits, unverifiable=0):
    out = [VerificationOutcome(UNIT, "x", Stage.HUMAN_EVIDENCE, 0, (0,), b) for b in bits]
    return out + [VerificationOutcome(UNIT)] * unverifiable


@pytest.mark.parametrize(
    "bits, unv, expected",
    [([1, 1, 0, 1], 0, Fraction(3, 4)), ([0, 0], 0, Fraction(0)), ([1, 1, 0], 1, Fraction(1, 2))],
)
def test_score_sample(bits, unv, expected):
    score = score_sample(_outcomes(bits, unv))
    assert score.fraction == expected and score.fact_count == len(bits) + unv


def test_score_exclusion_flag_and_empty():
    assert score_sample(_outcomes([1, 1, 0], 1), exclude_unverifiable=True).fraction == Fraction(2, 3)
    with pytest.raises(EmptyScore):
        score_sample([])
    with pytest.raises(EmptyScore):
        score_sample(_outcomes([], 2), exclude_unverifiable=True)


@given(st.lists(st.integers(0, 1)), st.integers(0, 5))
def test_score_is_exact_rational(bits, unv):
    if not bits and not unv:
        return
    s = score_sample(_outcomes(bits, unv))
    n = len(bits) + unv
    assert s.fraction == Fraction(sum(bits), n)
    assert 0 <= s.fraction <= 1 and (s.fraction * n).denominator == 1


def _three_unit_tables():
    units = units_json(("q1", "a1", "s1"), ("q2", "a2", "s2"), ("q3", "a3", "s3"))
    return dict(
        texts={TEXT: ("X", units)},
        evidence={("e0", "q1"): "a1", ("e0", "q2"): "a2", ("e0", "q3"): "zz"},
    )


def test_evaluate_sample_two_of_three(scripted):
    sample = make_sample(he=["e0"], texts={"m": TEXT})
    provider, gw = scripted(**_three_unit_tables())
    backend = FixtureSearchBackend({})
    res = evaluate_sample(sample, "m", plan_scenario("he"), SearchClient(backend), gw)
    assert res.status == "ok" and res.score.fraction == Fraction(2, 3)
    assert backend.calls == 0 and count_kind(provider, "se") == 0
    assert [o.consistency for o in res.outcomes] == [1, 1, 0]


def test_evaluate_sample_warm_cache(tmp_path, scripted):
    sample = make_sample(he=["e0"], texts={"m": TEXT})
    cache = tmp_path / "llm.jsonl"
    _, gw = scripted(cache_path=cache, **_three_unit_tables())
    first = evaluate_sample(sample, "m", plan_scenario("he"), None, gw)

    def unreachable(prompt):
        raise AssertionError("provider must not be called")

    provider = ScriptedProvider(unreachable)
    again = evaluate_sample(sample, "m", plan_scenario("he"), None, Gateway(provider, ResponseCache(cache)))
    assert again.to_dict() == first.to_dict() and provider.calls == 0


def test_evaluate_sample_flags(scripted):
    _, gw = scripted(texts={TEXT: ("X", "no list")})
    res = evaluate_sample(make_sample(texts={"m": TEXT}), "m", plan_scenario("se+lk"), None, gw)
    assert res.status == "extraction_failed" and res.score is None
    res = evaluate_sample(make_sample(), "m", plan_scenario("se+lk"), None, gw)
    assert res.status == "missing_text"
    _, gw = scripted(texts={TEXT: ("X", "[]")})
    res = evaluate_sample(make_sample(texts={"m": TEXT}), "m", plan_scenario("se+lk"), None, gw)
    assert res.status == "no_fact_units"


def test_result_round_trip(scripted):
    _, gw = scripted(**_three_unit_tables())
    res = evaluate_sample(make_sample(he=["e0"], texts={"m": TEXT}), "m", plan_scenario("he"), None, gw)
    from factscope.pipeline import SampleResult

    assert SampleResult.from_dict(res.to_dict()).to_dict() == res.to_dict()


def test_evaluate_corpus_parallel_matches_serial(scripted):
    tables = _three_unit_tables()
    samples = [make_sample(f"s{k}", he=["e0"], texts={"m": TEXT, "n": TEXT}) for k in range(4)]
    _, gw1 = scripted(**tables)
    _, gw2 = scripted(**tables)
    serial = evaluate_corpus(samples, ["m", "n"], plan_scenario("he"), None, gw1)
    seen = []
    parallel = evaluate_corpus(samples, ["n", "m"], plan_scenario("he"), None, gw2, workers=4, on_result=seen.append)
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in parallel]
    assert len(seen) == 8 and serial[0].key == ("s0", "m", "he,se+lk")


def test_evaluate_corpus_skip(scripted):
    _, gw = scripted(**_three_unit_tables())
    samples = [make_sample(f"s{k}", he=["e0"], texts={"m": TEXT}) for k in range(2)]
    out = evaluate_corpus(samples, ["m"], plan_scenario("he"), None, gw, skip=[("s0", "m", "he,se+lk")])
    assert [r.sample_id for r in out] == ["s1"]
