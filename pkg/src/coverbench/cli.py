"""Command-line pipeline: files in, files out, one stage per subcommand.

Stages communicate exclusively through the documented file artifacts, so any
stage can be rerun in isolation and external scorers can slot in between.
All outputs are written atomically (temp file + rename) and contain no
timestamps, so a rerun over unchanged inputs is byte-identical.

Exit codes: 0 ok, 2 usage, 3 missing input, 4 schema/format error,
5 inconsistent data (id mismatches, cardinality), 6 invalid configuration,
7 lock or bind failure, 8 external matcher failure, 1 unexpected error.
"""

from __future__ import annotations

import argparse
import shlex
import sys
from pathlib import Path

from . import annotation, evaluation, sampling, scoring, store
from .config import PipelineConfig, load_config
from .errors import (
    ConfigError,
    DataMismatchError,
    LockError,
    MatcherError,
    MissingInputError,
    SchemaError,
    ToolkitError,
)
from .model import Source, VersionRecord, version_sort_key
from .server import CurationApp, CurationStore, create_server
from .store import path_lock

EXIT_CODES = {
    MissingInputError: 3,
    SchemaError: 4,
    DataMismatchError: 5,
    ConfigError: 6,
    LockError: 7,
    MatcherError: 8,
}

EPILOG = """exit codes:
  0  success
  2  usage error
  3  missing input file or directory
  4  schema or file-format error
  5  inconsistent data (id mismatch, cardinality)
  6  invalid configuration value
  7  lock already held or port unavailable
  8  external matcher failure
  1  unexpected error
"""


def _exit_code(exc: ToolkitError) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 1


def _input(config: PipelineConfig, args, flag: str, required: bool = True) -> str | None:
    """Resolve an input path: the flag wins, config [paths] supplies defaults."""
    value = getattr(args, flag.replace("-", "_"))
    if value is None:
        value = config.paths.get(flag)
    if value is None and required:
        raise MissingInputError(
            f"missing input path: pass --{flag} or set paths.\"{flag}\" in the config"
        )
    return value


def _require(path: str | Path, kind: str = "file") -> Path:
    p = Path(path)
    if kind == "dir" and not p.is_dir():
        raise MissingInputError(f"no such directory: {p}")
    if kind == "file" and not p.is_file():
        raise MissingInputError(f"no such file: {p}")
    return p


def _say(message: str) -> None:
    print(message, flush=True)


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands


def cmd_queries(config: PipelineConfig, args) -> int:
    seed = store.read_dataset(_require(_input(config, args, "seed"), "dir"))
    suggestions: dict[str, list[str]] = {}
    suggestions_path = _input(config, args, "suggestions", required=False)
    if suggestions_path:
        for work_id, text in store.read_queries(_require(suggestions_path)):
            suggestions.setdefault(work_id, []).append(text)
    rows: list[tuple[str, str]] = []
    for work_id, versions in sorted(seed.versions_by_work().items()):
        first = min(versions, key=lambda v: version_sort_key(v.version_id))
        for query in store.formulate_queries(
            first.performer, first.title, suggestions.get(work_id, [])
        ):
            rows.append((work_id, query))
    store.write_queries(args.out, rows)
    _say(f"queries: {len(rows)} queries for {len(seed.versions_by_work())} works -> {args.out}")
    return 0


def cmd_ingest(config: PipelineConfig, args) -> int:
    cap = args.duration_cap if args.duration_cap is not None else config.duration_cap_s
    if cap <= 0:
        raise ConfigError(f"duration cap must be positive, got {cap}")
    crawl_path = _require(_input(config, args, "crawl"))
    with open(crawl_path, encoding="utf-8") as fh:
        n_lines = sum(1 for line in fh if line.strip())
    records = store.load_crawl(crawl_path, duration_cap_s=cap)
    queries_path = _require(_input(config, args, "queries"))
    work_of_query = {query: work_id for work_id, query in store.read_queries(queries_path)}

    unknown = sorted({r.originating_query for r in records} - set(work_of_query))
    if unknown:
        raise DataMismatchError(
            f"crawl records reference queries missing from the query table: "
            f"{unknown[:5]}"
        )
    candidates = []
    seen: set[tuple[str, str]] = set()
    for rec in records:
        work_id = work_of_query[rec.originating_query]
        key = (work_id, rec.video_id)
        if key in seen:
            continue
        seen.add(key)
        candidates.append(
            VersionRecord(
                work_id=work_id,
                version_id=rec.video_id,
                video_id=rec.video_id,
                title=rec.title,
                performer="",
                channel=rec.channel,
                duration_s=rec.duration_s,
                upload_date=rec.upload_date,
                source=Source.WEB_CANDIDATE,
            )
        )
    store.write_versions(args.out, candidates)
    works = {c.work_id for c in candidates}
    _say(
        f"ingest: kept {len(candidates)} of {n_lines} crawl records across "
        f"{len(works)} works -> {args.out}"
    )
    return 0


def cmd_score(config: PipelineConfig, args) -> int:
    music_agg = args.music_agg or config.music_agg
    if music_agg not in ("mean", "max"):
        raise ConfigError(f"music aggregation must be mean or max, got {music_agg!r}")
    seed = store.read_dataset(_require(_input(config, args, "seed"), "dir"))
    candidates = store.read_versions(_require(_input(config, args, "candidates")))
    emb = store.load_embeddings(
        _require(_input(config, args, "embeddings-matrix")),
        _require(_input(config, args, "embeddings-index")),
    )
    if args.matcher_cmd:
        matcher = scoring.ExternalMatcher(command=shlex.split(args.matcher_cmd))
    else:
        matcher = scoring.FuzzyMatcher()
    records = scoring.score_dataset(seed, candidates, emb, matcher, music_agg=music_agg)
    scoring.write_scores(args.out, records)
    _say(
        f"score: {len(records)} candidate scores across "
        f"{len({r.work_id for r in records})} works -> {args.out}"
    )
    return 0


def cmd_sample(config: PipelineConfig, args) -> int:
    k = args.k if args.k is not None else config.k_per_group
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    records = scoring.read_scores(_require(_input(config, args, "scores")))
    clouds = sampling.clouds_from_scores(records)
    assignments = sampling.sample_dataset(clouds, k=k)
    sampling.write_sampled(args.out, assignments)
    for vid, works in sampling.cross_work_candidates(assignments).items():
        _warn(f"candidate {vid} sampled for multiple works: {', '.join(works)}")
    _say(
        f"sample: {len(assignments)} assignments across {len(clouds)} works "
        f"(k={k}) -> {args.out}"
    )
    return 0


def cmd_hits(config: PipelineConfig, args) -> int:
    rng_seed = args.rng_seed if args.rng_seed is not None else config.rng_seed
    sampled = sampling.read_sampled(_require(_input(config, args, "sampled")))
    seed = store.read_dataset(_require(_input(config, args, "seed"), "dir"))
    hits = annotation.build_hits(sampled, seed, rng_seed=rng_seed)
    annotation.write_hits(args.out, hits)
    _say(f"hits: {len(hits)} tasks (rng_seed={rng_seed}) -> {args.out}")
    return 0


def cmd_votes(config: PipelineConfig, args) -> int:
    threshold = args.threshold if args.threshold is not None else config.vote_threshold
    min_duration = (
        args.min_duration
        if args.min_duration is not None
        else config.min_assignment_duration_s
    )
    if threshold < 1:
        raise ConfigError(f"vote threshold must be >= 1, got {threshold}")
    seed = store.read_dataset(_require(_input(config, args, "seed"), "dir"))
    hits = annotation.read_hits(_require(_input(config, args, "hits")), seed)
    assignments = annotation.read_assignments(
        _require(_input(config, args, "assignments"))
    )
    overrides: list[tuple[str, str]] = []
    overrides_path = _input(config, args, "overrides", required=False)
    if overrides_path:
        overrides = [
            (r[0], r[1])
            for r in store.read_tsv(_require(overrides_path), ("hit_id", "worker_id"))
        ]
    outcome = annotation.aggregate_votes(
        hits,
        assignments,
        threshold=threshold,
        min_duration_s=min_duration,
        overrides=overrides,
    )
    annotation.write_votes(args.out, outcome.votes)
    n_undecided = sum(1 for v in outcome.votes if v.final is None)
    _say(
        f"votes: {len(outcome.votes)} candidates, {n_undecided} undecided; "
        f"assignments accepted {outcome.n_accepted}/{outcome.n_assignments} "
        f"(excluded {outcome.n_excluded}, rejected {len(outcome.rejected)}) -> {args.out}"
    )
    return 0


def _labels_with_groups(labels, sampled):
    group_of = {(a.work_id, a.video_id): a.group for a in sampled}
    out = []
    for l in labels:
        group = group_of.get((l.work_id, l.video_id))
        out.append(
            store.LabelRecord(
                work_id=l.work_id,
                video_id=l.video_id,
                relevance=l.relevance,
                uncertainty=l.uncertainty,
                group=group,
                flag=l.flag,
            )
        )
    return out


def cmd_benchmark(config: PipelineConfig, args) -> int:
    votes = annotation.read_votes(_require(_input(config, args, "votes")))
    sampled = sampling.read_sampled(_require(_input(config, args, "sampled")))
    curation_path = _input(config, args, "curation", required=False)
    curation = annotation.read_curation(_require(curation_path)) if curation_path else []
    labels = _labels_with_groups(annotation.merge_curation(votes, curation), sampled)

    candidates = store.read_versions(_require(_input(config, args, "candidates")))
    voted = {(v.work_id, v.video_id) for v in votes}
    members = [c for c in candidates if (c.work_id, c.video_id) in voted]
    missing = voted - {(m.work_id, m.video_id) for m in members}
    if missing:
        raise DataMismatchError(
            f"voted candidates missing from the candidate table: "
            f"{sorted(missing)[:5]}"
        )
    shs_yt = store.Dataset(versions=members, labels=labels)
    seed = store.read_dataset(_require(_input(config, args, "seed"), "dir"))

    queries = None
    queries_from = _input(config, args, "queries-from", required=False)
    if queries_from:
        hits = annotation.read_hits(_require(queries_from), seed)
        queries = {h.work_id: h.query_version.version_id for h in hits}

    exclusions: set[str] = set()
    exclude_path = _input(config, args, "exclude", required=False)
    if exclude_path:
        text = _require(exclude_path).read_text(encoding="utf-8")
        exclusions = {line.strip() for line in text.splitlines() if line.strip()}

    variant = evaluation.BenchmarkVariant.parse(args.variant)
    benchmark = evaluation.assemble_benchmark(
        shs_yt, seed, variant, exclusions=exclusions, queries=queries
    )
    for message in benchmark.warnings:
        _warn(message)
    evaluation.write_benchmark(args.out, benchmark)
    if args.labels_out:
        store.write_labels(args.labels_out, labels)
    _say(
        f"benchmark: {len(benchmark.members)} members (variant {variant.value}, "
        f"{len(benchmark.exclusions_applied)} exclusions) -> {args.out}"
    )
    return 0


def _parse_sims_arg(text: str) -> tuple[str, Path, Path]:
    if "=" not in text:
        raise ConfigError(
            f"--sims expects NAME=MATRIX,INDEX, got {text!r}"
        )
    name, _, paths = text.partition("=")
    if "," not in paths:
        raise ConfigError(
            f"--sims expects NAME=MATRIX,INDEX, got {text!r}"
        )
    matrix_path, _, index_path = paths.partition(",")
    return name, Path(matrix_path), Path(index_path)


def cmd_eval(config: PipelineConfig, args) -> int:
    alpha = args.alpha if args.alpha is not None else config.significance_alpha
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"significance alpha must be in (0, 1), got {alpha}")
    benchmark = evaluation.read_benchmark(_require(_input(config, args, "benchmark")))

    uncertainty = {}
    labels_path = _input(config, args, "labels", required=False)
    if labels_path:
        for l in store.read_labels(_require(labels_path)):
            if l.uncertainty is not None:
                uncertainty[(l.work_id, l.video_id)] = l.uncertainty

    matrices: dict[str, evaluation.SimilarityMatrix] = {}
    for sims_arg in args.sims or []:
        name, matrix_path, index_path = _parse_sims_arg(sims_arg)
        matrices[name] = evaluation.load_similarities(
            _require(matrix_path), _require(index_path)
        )
    emb_matrix = _input(config, args, "embeddings-matrix", required=False)
    emb_index = _input(config, args, "embeddings-index", required=False)
    if emb_matrix or emb_index:
        if not (emb_matrix and emb_index):
            raise ConfigError(
                "--embeddings-matrix and --embeddings-index must be given together"
            )
        emb = store.load_embeddings(_require(emb_matrix), _require(emb_index))
        member_vids = list(dict.fromkeys(m.video_id for m in benchmark.members))
        matrices[args.model_name] = evaluation.sims_from_embeddings(emb, member_vids)
    if not matrices:
        raise ConfigError("eval needs --sims and/or --embeddings-matrix/--embeddings-index")

    models: dict[str, evaluation.ModelEval] = {}
    for name, matrix in sorted(matrices.items()):
        retrieval = evaluation.evaluate(benchmark, matrix)
        pair_stats = evaluation.pair_class_stats(
            matrix, benchmark.members, benchmark.relevance
        )
        group_stats = evaluation.grouped_uncertainty_stats(
            matrix, benchmark.members, benchmark.relevance, uncertainty, alpha_sig=alpha
        )
        models[name] = evaluation.ModelEval(
            retrieval=retrieval, pair_stats=pair_stats, group_stats=group_stats
        )

    report = evaluation.EvalReport(
        models=models, benchmark_size=len(benchmark.members), alpha_sig=alpha
    )
    store.atomic_write_text(args.report_json, report.to_json())
    store.atomic_write_text(args.report_md, evaluation.render_markdown(report))
    summary = ", ".join(
        f"{name}: MAP {ev.retrieval.map:.4f} MR1 {ev.retrieval.mr1:.2f}"
        for name, ev in sorted(models.items())
    )
    _say(f"eval: {summary} -> {args.report_json}, {args.report_md}")
    return 0


def cmd_serve(config: PipelineConfig, args) -> int:
    threshold = args.threshold if args.threshold is not None else config.vote_threshold
    min_duration = (
        args.min_duration
        if args.min_duration is not None
        else config.min_assignment_duration_s
    )
    seed = store.read_dataset(_require(_input(config, args, "seed"), "dir"))
    candidates = store.read_versions(_require(_input(config, args, "candidates")))
    hits = annotation.read_hits(_require(_input(config, args, "hits")), seed)
    assignments = annotation.read_assignments(
        _require(_input(config, args, "assignments"))
    )
    outcome = annotation.aggregate_votes(
        hits, assignments, threshold=threshold, min_duration_s=min_duration
    )
    worker_labels: dict[tuple[str, str], list[str]] = {}
    hit_by_id = {h.hit_id: h for h in hits}
    for hit_id, accepted in outcome.accepted_by_hit.items():
        hit = hit_by_id[hit_id]
        for a in accepted:
            for vid in hit.candidates:
                worker_labels.setdefault((hit.work_id, vid), []).append(
                    a.labels[vid].canonical
                )

    dataset = store.Dataset(versions=candidates + seed.versions)
    with path_lock(args.store):
        app = CurationApp(
            dataset=dataset,
            hits=hits,
            votes=outcome.votes,
            store=CurationStore.open(args.store),
            worker_labels=worker_labels,
        )
        server = create_server(app, args.host, args.port)
        host, port = server.server_address[:2]
        _say(f"serve: listening on http://{host}:{port} (store: {args.store})")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coverbench",
        description=__doc__,
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", help="TOML config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("queries", help="formulate search queries per work")
    p.add_argument("--seed", help="seed dataset directory")
    p.add_argument("--suggestions", help="optional TSV (work_id, suggestion)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_queries)

    p = sub.add_parser("ingest", help="parse crawl metadata into candidates")
    p.add_argument("--crawl", help="crawl.jsonl")
    p.add_argument("--queries", help="queries.tsv mapping queries to works")
    p.add_argument("--duration-cap", type=int, help="drop videos at or above this length (s)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("score", help="aggregate music and text scores per candidate")
    p.add_argument("--seed")
    p.add_argument("--candidates")
    p.add_argument("--embeddings-matrix")
    p.add_argument("--embeddings-index")
    p.add_argument("--matcher-cmd", help="external matcher command (default: built-in fuzzy)")
    p.add_argument("--music-agg", choices=("mean", "max"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sample", help="uncertainty sampling into annotation groups")
    p.add_argument("--scores")
    p.add_argument("--k", type=int, help="candidates per group (default from config)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("hits", help="build annotation tasks")
    p.add_argument("--sampled")
    p.add_argument("--seed")
    p.add_argument("--rng-seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hits)

    p = sub.add_parser("votes", help="validate assignments and aggregate votes")
    p.add_argument("--hits")
    p.add_argument("--assignments")
    p.add_argument("--seed")
    p.add_argument("--threshold", type=int)
    p.add_argument("--min-duration", type=int)
    p.add_argument("--overrides", help="TSV (hit_id, worker_id) quality-fail overrides")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_votes)

    p = sub.add_parser("benchmark", help="merge curation and assemble a benchmark set")
    p.add_argument("--votes")
    p.add_argument("--sampled")
    p.add_argument("--candidates")
    p.add_argument("--seed")
    p.add_argument("--curation", help="expert curation table")
    p.add_argument("--queries-from", help="hits.csv supplying annotation query versions")
    p.add_argument("--exclude", help="file with one video id to exclude per line")
    p.add_argument(
        "--variant",
        default="yt2q",
        choices=[v.value for v in evaluation.BenchmarkVariant],
    )
    p.add_argument("--labels-out", help="write the merged label table here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("eval", help="retrieval metrics and distribution statistics")
    p.add_argument("--benchmark")
    p.add_argument("--sims", action="append", help="NAME=MATRIX,INDEX similarity files")
    p.add_argument("--embeddings-matrix", help="embeddings for the built-in cosine model")
    p.add_argument("--embeddings-index")
    p.add_argument("--model-name", default="cosine")
    p.add_argument("--labels", help="labels.tsv with uncertainty classes")
    p.add_argument("--alpha", type=float, help="significance level (default 0.01)")
    p.add_argument("--report-json", required=True)
    p.add_argument("--report-md", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="REST service for the curation UI")
    p.add_argument("--seed")
    p.add_argument("--candidates")
    p.add_argument("--hits")
    p.add_argument("--assignments")
    p.add_argument("--store", required=True, help="curation TSV (created if missing)")
    p.add_argument("--threshold", type=int)
    p.add_argument("--min-duration", type=int)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return args.func(config, args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
