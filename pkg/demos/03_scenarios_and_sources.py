"""
Scenarios decide which fact sources are asked, and in what order
================================================================

A scenario is an ordered list of sources; search plus the evaluator's own
knowledge always comes last. Long documents are split into passages of at
most ``chunk_limit`` whitespace tokens, preferring sentence boundaries.
"""

from factscope.model import Origin, Sample, TaskKind, make_passages
from factscope.sources import SCENARIO_PRESETS, ScenarioError, build_sources, chunk_document, plan_scenario

for name, spec in SCENARIO_PRESETS.items():
    print(f"{name:<12} -> {' > '.join(s.value for s in plan_scenario(spec, name=name).stages)}")

for bad in ["he,he", "se+lk,rd", "wiki"]:
    try:
        plan_scenario(bad)
    except ScenarioError as e:
        print("rejected:", e)

article = " ".join(f"Sentence number {k} ends here." for k in range(400))
chunks = chunk_document(article, 300, doc_id="article", origin=Origin.REFERENCE_DOC)
print("\n%d tokens -> %d passages of %s tokens" % (len(article.split()), len(chunks), [len(c.text.split()) for c in chunks]))

sample = Sample(
    id="s", task_kind=TaskKind.NEWS_FACT_GENERATION, query="t",
    human_evidence=make_passages(["A short summary."], Origin.HUMAN_EVIDENCE),
    # evidence and reference passages are used as stored, so long articles are chunked up front
    reference_docs=tuple(chunks),
)
diag = []
for src in build_sources(sample, plan_scenario("rd,he"), "any-model", chunk_limit=300, diagnostics=diag):
    print(f"{src.stage.value:<6} passages={len(src.passages)} deferred={src.deferred}")
