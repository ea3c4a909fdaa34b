"""Command-line entry point.

Subcommands: ingest, generate, run, score, dp, corr, report. Exit codes are
0 on success, 1 on a runtime failure (details on stderr) and 2 on a usage
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
from pathlib import Path
from typing import Optional

from . import __version__
from .config import ConfigError, config_digest, load_config, scenario_spec
from .datasets import build_golden_answer, generate_corpus_texts, ingest, load_corpus, save_corpus
from .files import (
    append_result,
    curve_csv,
    read_results,
    read_scores,
    scores_from_results,
    write_results,
    write_scores,
)
from .llm import Gateway, ModelSettings, ResponseCache, TemplateId, load_provider
from .pipeline import PipelineConfig, evaluate_corpus
from .sources import SearchClient, load_search_backend, plan_scenario
from .stats import DpConfig, dp_curve, factuality_table, pearson, spearman

logger = logging.getLogger("factscope")


class CommandError(RuntimeError):
    pass


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", help="YAML or JSON config file")
    g.add_argument("--cache-dir", help="directory for LLM and search caches")
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--provider", help="mock:<fixture.json> or openai")
    g.add_argument("--scenario", help="preset name or stage list such as he,rd,se+lk")
    g.add_argument("--search", help="fixture:<file>, serpapi or none")
    g.add_argument("--model", help="evaluator model name")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="factscope", parents=[common], description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="raw dataset -> corpus JSON-lines")
    p.add_argument("--raw", required=True)
    p.add_argument("--dataset", required=True, help="built-in mapping name or mapping JSON file")
    p.add_argument("--limit", type=int, default=200)
    p.add_argument("--out", required=True)
    p.add_argument("--golden", help="also write golden answers JSON-lines here")

    p = sub.add_parser("generate", parents=[common], help="generate model texts for a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--models", required=True, help="comma-separated model names")
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", parents=[common], help="evaluate models under a scenario")
    p.add_argument("--corpus", required=True)
    p.add_argument("--models", help="comma-separated model ids (default: every model with text)")
    p.add_argument("--out", required=True)
    p.add_argument("--usage", help="usage report path (default: <out>.usage.json)")
    p.add_argument("--with-score", dest="with_score", help="also write a score file")
    p.add_argument("--force", action="store_true", help="re-evaluate pairs already in --out")

    p = sub.add_parser("score", parents=[common], help="results -> score file")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--only-scenario", dest="only_scenario")

    p = sub.add_parser("dp", parents=[common], help="score files -> MR-PT curve CSV")
    p.add_argument("--scores", required=True, nargs="+")
    p.add_argument("--bootstrap", type=int)
    p.add_argument("--mode", choices=["SharedDraws", "PerThreshold"])
    p.add_argument("--out")

    p = sub.add_parser("corr", parents=[common], help="Pearson/Spearman between two score files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--models", help="restrict to these comma-separated models")
    p.add_argument("--out")

    p = sub.add_parser("report", parents=[common], help="factuality table and usage summary")
    p.add_argument("--results", required=True, nargs="+")
    p.add_argument("--usage", nargs="*", default=[])
    p.add_argument("--labels", help="JSON file mapping model id -> display label")
    p.add_argument("--out")
    return parser


def _resolve(args) -> dict:
    overrides = {
        "cache_dir": args.cache_dir,
        "seed": args.seed,
        "workers": args.workers,
        "provider": args.provider,
        "scenario": args.scenario,
        "search": args.search,
        "model": args.model,
    }
    if getattr(args, "bootstrap", None) is not None:
        overrides["dp.bootstrap"] = args.bootstrap
    if getattr(args, "mode", None) is not None:
        overrides["dp.resample_mode"] = args.mode
    return load_config(args.config, overrides)


def _gateway(cfg: dict, model_name: Optional[str] = None) -> Gateway:
    cache = None
    if cfg["cache_dir"]:
        cache = ResponseCache(Path(cfg["cache_dir"]) / "llm_cache.jsonl")
    settings = ModelSettings(model_name or cfg["model"], float(cfg["temperature"]), int(cfg["max_output"]))
    overrides = {
        TemplateId(t): ModelSettings(m, settings.temperature, settings.max_output) for t, m in cfg["module_models"].items()
    }
    return Gateway(load_provider(cfg["provider"]), cache, settings, overrides, retries=int(cfg["retries"]))


def _search_client(cfg: dict) -> Optional[SearchClient]:
    backend = load_search_backend(cfg["search"])
    if backend is None:
        return None
    cache_path = Path(cfg["cache_dir"]) / "search_cache.jsonl" if cfg["cache_dir"] else None
    return SearchClient(backend, int(cfg["top_k"]), cache_path)


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_ingest(args, cfg) -> None:
    corpus = ingest(args.raw, args.dataset, args.limit)
    for d in corpus.diagnostics:
        print(d, file=sys.stderr)
    save_corpus(corpus, args.out)
    if args.golden:
        with open(args.golden, "w", encoding="utf-8") as f:
            for s in corpus:
                g = build_golden_answer(s, cfg["golden_separator"])
                f.write(json.dumps({"id": s.id, "golden": g.text, "parts": [list(p) for p in g.parts]}, ensure_ascii=False) + "\n")
    print(f"wrote {corpus.sample_count} samples to {args.out}", file=sys.stderr)


def cmd_generate(args, cfg) -> None:
    corpus = load_corpus(args.corpus)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    gateways = {m: _gateway(cfg, m) for m in models}
    out = generate_corpus_texts(corpus, gateways, _gateway(cfg))
    for d in out.diagnostics:
        print(d, file=sys.stderr)
    save_corpus(out, args.out)


def cmd_run(args, cfg) -> None:
    corpus = load_corpus(args.corpus)
    name, spec = scenario_spec(cfg, args.scenario)
    scenario = plan_scenario(spec, name=name)
    if args.models:
        models = [m.strip() for m in args.models.split(",") if m.strip()]
    else:
        models = sorted({m for s in corpus for m in s.generated_texts})
    digest = config_digest(cfg)
    out = Path(args.out)

    previous = []
    if out.exists() and not args.force:
        _, previous = read_results(out)
    write_results(out, previous, cfg, digest)

    gateway = _gateway(cfg)
    client = _search_client(cfg)
    pcfg = PipelineConfig(
        chunk_limit=int(cfg["chunk_limit"]),
        extraction_reprompts=int(cfg["extraction_reprompts"]),
        parse_reprompts=int(cfg["parse_reprompts"]),
        passage_cap=cfg["passage_cap"],
        exclude_unverifiable=bool(cfg["exclude_unverifiable"]),
    )
    lock = threading.Lock()

    def flush(r):
        with lock:
            append_result(out, r, digest)

    try:
        fresh = evaluate_corpus(
            corpus.samples,
            models,
            scenario,
            client,
            gateway,
            pcfg,
            workers=int(cfg["workers"]),
            skip={r.key for r in previous},
            on_result=flush,
        )
    finally:
        usage_path = Path(args.usage) if args.usage else out.with_name(out.name + ".usage.json")
        usage = gateway.usage().to_dict()
        usage["search_backend_calls"] = client.backend_calls if client else 0
        usage["config_digest"] = digest
        usage_path.write_text(json.dumps(usage, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    results = previous + fresh
    write_results(out, results, cfg, digest)
    if args.with_score:
        sf = scores_from_results(results)
        sf.config_digest = digest
        write_scores(args.with_score, sf)
    print(f"evaluated {len(fresh)} pairs ({len(previous)} reused) -> {out}", file=sys.stderr)


def cmd_score(args, cfg) -> None:
    header, results = read_results(args.results)
    sf = scores_from_results(results, args.only_scenario)
    sf.config_digest = (header or {}).get("config_digest", "")
    write_scores(args.out, sf)


def cmd_dp(args, cfg) -> None:
    matrix: dict[str, list[float]] = {}
    for path in args.scores:
        for model, scores in read_scores(path).scores.items():
            if model in matrix:
                raise CommandError(f"model {model!r} appears in more than one score file")
            matrix[model] = scores
    matrix = {m: s for m, s in matrix.items() if s}
    if len(matrix) < 2:
        raise CommandError("need ≥ 2 models with scores for discriminative power")
    dp = cfg["dp"]
    config = DpConfig(tuple(dp["thresholds"]), int(dp["bootstrap"]), int(cfg["seed"]), dp["resample_mode"])
    _write_or_print(curve_csv(dp_curve(matrix, config), config_digest(cfg)), args.out)


def _aligned(a, b, models):
    xs, ys = [], []
    for m in models:
        if m in a.sample_ids and m in b.sample_ids:
            bpos = dict(zip(b.sample_ids[m], b.scores[m]))
            for sid, v in zip(a.sample_ids[m], a.scores[m]):
                if sid in bpos:
                    xs.append(v)
                    ys.append(bpos[sid])
        else:
            if len(a.scores[m]) != len(b.scores[m]):
                raise CommandError(f"model {m!r}: score lists differ in length and carry no sample ids")
            xs.extend(a.scores[m])
            ys.extend(b.scores[m])
    return xs, ys


def cmd_corr(args, cfg) -> None:
    a, b = read_scores(args.a), read_scores(args.b)
    common = sorted(set(a.scores) & set(b.scores))
    if args.models:
        wanted = [m.strip() for m in args.models.split(",")]
        common = [m for m in common if m in wanted]
    if not common:
        raise CommandError("no models in common")
    xs, ys = _aligned(a, b, common)
    out = {"models": common, "n": len(xs), "pearson": pearson(xs, ys), "spearman": spearman(xs, ys)}
    _write_or_print(json.dumps(out, indent=2) + "\n", args.out)


def cmd_report(args, cfg) -> None:
    results = []
    for path in args.results:
        results.extend(read_results(path)[1])
    sf = scores_from_results(results)
    labels = json.loads(Path(args.labels).read_text()) if args.labels else None
    rows = factuality_table(sf.scores, labels, sf.excluded)

    usage_totals: dict = {}
    for path in args.usage:
        u = json.loads(Path(path).read_text())
        for k in ("total_calls", "cache_hits", "total_prompt_tokens", "total_completion_tokens", "total_wall_millis"):
            usage_totals[k] = usage_totals.get(k, 0) + int(u.get(k, 0))
        usage_totals["approximate_tokens"] = usage_totals.get("approximate_tokens", False) or bool(u.get("approximate_tokens"))

    print(f"{'model':<24}{'mean':>8}{'n':>6}{'excluded':>10}", file=sys.stderr)
    for r in rows:
        mean = f"{r.mean:.3f}" if r.mean is not None else "-"
        print(f"{r.label:<24}{mean:>8}{r.count:>6}{r.excluded:>10}", file=sys.stderr)
    report = {
        "factuality": [
            {"label": r.label, "model_id": r.model_id, "mean": r.mean, "count": r.count, "excluded": r.excluded} for r in rows
        ],
        "usage": usage_totals,
    }
    _write_or_print(json.dumps(report, indent=2) + "\n", args.out)


COMMANDS = {
    "ingest": cmd_ingest,
    "generate": cmd_generate,
    "run": cmd_run,
    "score": cmd_score,
    "dp": cmd_dp,
    "corr": cmd_corr,
    "report": cmd_report,
}


def run_command(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        COMMANDS[args.command](args, cfg)
    except KeyboardInterrupt:
        print("interrupted; completed records were flushed", file=sys.stderr)
        return 1
    except (CommandError, ConfigError, ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
