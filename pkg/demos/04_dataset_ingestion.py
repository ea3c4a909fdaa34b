"""
From raw dataset rows to a corpus and golden answers
====================================================

Each raw layout is described by a small mapping spec, so adding a dataset is
a JSON file rather than a parser. Golden answers are exported for
reference-based metrics.
"""

import json
import tempfile
from pathlib import Path

from factscope.datasets import MAPPINGS, build_golden_answer, ingest, load_corpus, save_corpus

rows = [
    {"id": "h1", "question": "Were both bands formed in London?", "answer": "yes",
     "docs": [{"title": "Band A", "text": "Band A formed in London."}, {"title": "Band B", "text": "Band B is a London group."}]},
    {"id": "h2", "answer": "no"},  # no question: skipped
    {"id": "h3", "question": "Who wrote it?", "answer": "Someone", "docs": []},
]

with tempfile.TemporaryDirectory() as tmp:
    raw = Path(tmp) / "hotpot.jsonl"
    raw.write_text("".join(json.dumps(r) + "\n" for r in rows))

    print("mapping:", json.dumps(MAPPINGS["hotpotqa"]))
    corpus = ingest(raw, "hotpotqa", limit=10)
    for d in corpus.diagnostics:
        print("note:", d)

    for s in corpus:
        g = build_golden_answer(s)
        print(f"\n{s.id}: {s.query}\n  golden parts: {[label for label, _ in g.parts]}\n  golden text: {g.text!r}")

    out = Path(tmp) / "corpus.jsonl"
    save_corpus(corpus, out)
    assert load_corpus(out).samples == corpus.samples
    print("\nround trip ok:", out.read_text().splitlines()[0][:80], "...")
