"""On-disk formats: results JSON-lines, score JSON, MR-PT curve CSV, usage JSON.

Results file
    First line ``{"type": "header", "config": {...}, "config_digest": ...}``,
    then one ``{"type": "result", ...}`` line per (sample, model, scenario).
Score file
    ``{"scores": {model: [...]}, "sample_ids": {...}, "excluded": {...},
    "config_digest": ...}``. A bare ``{model: [...]}`` mapping is accepted
    too, so scores from any external metric can be compared.
Curve CSV
    A ``# config_digest=...`` comment line, then columns ``f,MR,PT``.
"""

from __future__ import annotations

import csv
import io
import json
import os
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .pipeline import SampleResult
from .stats import DpCurve

PathLike = Union[str, Path]


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def write_results(path: PathLike, results: Iterable[SampleResult], config: Mapping, digest: str) -> None:
    """Rewrite ``path`` atomically with a header and results sorted by key."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as f:
        f.write(_dumps({"type": "header", "config": dict(config), "config_digest": digest}) + "\n")
        for r in sorted(results, key=lambda r: r.key):
            f.write(_dumps({"type": "result", "config_digest": digest, **r.to_dict()}) + "\n")
    os.replace(tmp, path)


def append_result(path: PathLike, result: SampleResult, digest: str) -> None:
    with open(path, "a", encoding="utf-8") as f:
        f.write(_dumps({"type": "result", "config_digest": digest, **result.to_dict()}) + "\n")


def read_results(path: PathLike) -> tuple[Optional[dict], list[SampleResult]]:
    header = None
    by_key: dict = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("type", "result")
            if kind == "header":
                header = rec
                continue
            rec.pop("config_digest", None)
            r = SampleResult.from_dict(rec)
            by_key[r.key] = r
    return header, [by_key[k] for k in sorted(by_key)]


@dataclass
class ScoreFile:
    scores: dict[str, list[float]]
    sample_ids: dict[str, list[str]] = field(default_factory=dict)
    excluded: dict[str, int] = field(default_factory=dict)
    config_digest: str = ""


def scores_from_results(results: Iterable[SampleResult], scenario: Optional[str] = None) -> ScoreFile:
    """Per-model score lists in sample-id order; excluded samples are counted, not scored.

    When the results mix scenarios (and none is selected) keys become
    ``model@scenario``.
    """
    results = [r for r in results if scenario is None or r.scenario == scenario]
    multi = len({r.scenario for r in results}) > 1
    scores: dict[str, list[float]] = defaultdict(list)
    ids: dict[str, list[str]] = defaultdict(list)
    excluded: dict[str, int] = defaultdict(int)
    for r in sorted(results, key=lambda r: r.key):
        key = f"{r.model_id}@{r.scenario}" if multi else r.model_id
        if r.score is None:
            excluded[key] += 1
            scores.setdefault(key, [])
            continue
        scores[key].append(r.score.value)
        ids[key].append(r.sample_id)
    return ScoreFile(dict(scores), dict(ids), dict(excluded))


def write_scores(path: PathLike, sf: ScoreFile) -> None:
    data = {"config_digest": sf.config_digest, "scores": sf.scores, "sample_ids": sf.sample_ids, "excluded": sf.excluded}
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_scores(path: PathLike) -> ScoreFile:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, Mapping) and isinstance(data.get("scores"), Mapping):
        return ScoreFile(
            {k: [float(v) for v in vs] for k, vs in data["scores"].items()},
            dict(data.get("sample_ids") or {}),
            {k: int(v) for k, v in (data.get("excluded") or {}).items()},
            data.get("config_digest", ""),
        )
    if not isinstance(data, Mapping) or not all(isinstance(v, list) for v in data.values()):
        raise ValueError(f"{path}: expected {{model_id: [scores]}}")
    return ScoreFile({k: [float(v) for v in vs] for k, vs in data.items()})


def curve_csv(curve: DpCurve, digest: str = "") -> str:
    buf = io.StringIO()
    if digest:
        buf.write(f"# config_digest={digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["f", "MR", "PT"])
    for f, mr, pt in curve.rows():
        w.writerow([repr(f), repr(mr), repr(pt)])
    return buf.getvalue()


def read_curve_csv(path: PathLike) -> list[tuple[float, float, float]]:
    with open(path, encoding="utf-8") as fh:
        rows = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(rows)
    return [(float(r["f"]), float(r["MR"]), float(r["PT"])) for r in reader]
