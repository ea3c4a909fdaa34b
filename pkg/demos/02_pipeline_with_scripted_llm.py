"""
One generated text through extraction, verification and judging
================================================================

No network here: a tiny rule-based function stands in for the LLM so every
step is visible. Swap ``ScriptedProvider`` for ``load_provider("openai")``
to run the same code against a real endpoint.
"""

import json
import re

from factscope.llm import Gateway, ResponseCache, ScriptedProvider
from factscope.model import Origin, Sample, TaskKind, make_passages
from factscope.pipeline import evaluate_sample
from factscope.sources import FixtureSearchBackend, SearchClient, plan_scenario

text = "The Eiffel Tower opened in 1889. It is 330 metres tall. It was designed by Gustave Eiffel."

sample = Sample(
    id="eiffel",
    task_kind=TaskKind.RETRIEVAL_AUGMENTED_QA,
    query="Tell me about the Eiffel Tower",
    human_evidence=make_passages(["The tower opened to the public in 1889."], Origin.HUMAN_EVIDENCE),
    reference_docs=make_passages(["At 300 metres it was the tallest structure of its day."], Origin.REFERENCE_DOC),
    generated_texts={"demo-model": text},
)

units = [
    {"question": "When did the Eiffel Tower open?", "answer": "1889", "sentence": "The Eiffel Tower opened in 1889."},
    {"question": "How tall is the Eiffel Tower?", "answer": "330 metres", "sentence": "It is 330 metres tall."},
    {"question": "Who designed the Eiffel Tower?", "answer": "Gustave Eiffel", "sentence": "It was designed by Gustave Eiffel."},
]
# what each passage can answer
known = {
    ("The tower opened to the public in 1889.", "When did the Eiffel Tower open?"): "1889",
    ("At 300 metres it was the tallest structure of its day.", "How tall is the Eiffel Tower?"): "300 metres",
}


def fake_llm(prompt: str) -> str:
    if prompt.startswith("Generate keywords"):
        return "Eiffel Tower"
    if prompt.startswith("Your task is to segment"):
        return "Here you go:\n" + json.dumps(units)
    if prompt.startswith("You are an answer-extraction expert"):
        evidence = re.search(r"evidence: (.*)\n\nquestion: (.*)\n\nyour answer:$", prompt, re.S)
        return known.get(evidence.groups(), "NOANS")
    if prompt.startswith("You are a question-answering expert"):
        return "[Gustave Eiffel's company]; [0]"
    if prompt.startswith("Your task is to judge"):
        a, b = re.search(r"Answer 1: (.*)\n\nAnswer 2: (.*)$", prompt, re.S).groups()
        return "Yes." if a.split()[0] == b.split()[0] else "No."
    raise ValueError(prompt[:40])


provider = ScriptedProvider(fake_llm)
# pass ResponseCache(path) instead to keep completions across processes
gateway = Gateway(provider, ResponseCache())
search = SearchClient(
    FixtureSearchBackend({"Eiffel Tower Who designed the Eiffel Tower?": [{"title": "Eiffel", "snippet": "Built by Eiffel et Cie."}]})
)

result = evaluate_sample(sample, "demo-model", plan_scenario("he,rd"), search, gateway)

for o in result.outcomes:
    where = f"{o.resolved_stage.value}[{o.resolved_index}]" if o.resolved_stage else "nowhere"
    print(f"{o.fact_unit.question:<34} claimed={o.fact_unit.claimed_answer!r:<18} found={o.extracted_answer!r} at {where} -> {o.consistency}")

print("\nscore:", result.score.fraction, "=", round(result.score.value, 3))
print("LLM calls:", provider.calls, " search calls:", search.backend_calls)

# Re-running hits the in-memory response cache, so the provider is not touched
evaluate_sample(sample, "demo-model", plan_scenario("he,rd"), search, gateway)
print("LLM calls after rerun:", provider.calls, " usage:", gateway.usage().to_dict()["cache_hits"], "cache hits")
