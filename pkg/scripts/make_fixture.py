#!/usr/bin/env python3
"""Regenerate the end-to-end test fixture and its golden outputs.

Builds a seeded synthetic corpus (100 works, seed versions, crawl metadata,
embeddings), runs the pipeline stage by stage, and generates worker
assignments plus expert curation against known ground truth.  The golden
votes table is computed by an independent majority-vote oracle here and must
match the pipeline's output byte for byte.

Usage: python scripts/make_fixture.py [dest_dir] [master_seed]
"""

from __future__ import annotations

import csv
import io
import shutil
import sys
from collections import Counter
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from coverbench import annotation, cli, store  # noqa: E402
from coverbench.model import (  # noqa: E402
    RelevanceLabel,
    Source,
    VersionRecord,
    uncertainty_class,
)

MASTER_SEED = 20240717  # overridable via argv for self-consistency checks
RNG_SEED = 7  # pipeline --rng-seed
N_WORKS = 100
DIM = 8

WORDS = (
    "silver river night garden thunder glass ember harbor velvet stone "
    "winter echo sparrow meadow lantern coral drift aurora willow crane"
).split()
SURNAMES = (
    "watts reed cole fox lane hart wade king bell may stone york knox "
    "cross dean ford rhodes sloan tate vance"
).split()

VERSION_UNCERTAINTY = [
    "song_difficult_cover",
    "song_drum_only",
    "song_instrumental",
    "song_mashup_remix",
    "song_medley",
    "song_single_instrument",
    "song_slowed_spedup",
    "song_vocal_only",
    "video_low_fidelity",
    "video_multiple_versions",
    "video_with_non_music",
    "none",
]
NEGATIVE_UNCERTAINTY = [
    "song_same_artist",
    "song_same_genre",
    "song_similar_version",
    "song_mashup_remix",
    "video_multiple_versions",
    "none",
]

V = RelevanceLabel.VERSION
NV = RelevanceLabel.NON_VERSION
NM = RelevanceLabel.NO_MUSIC
M = RelevanceLabel.MATCH


def work_name(rng) -> tuple[str, str]:
    title = " ".join(
        w.capitalize() for w in rng.choice(WORDS, size=2, replace=False)
    )
    performer = "The " + str(rng.choice(SURNAMES)).capitalize() + "s"
    return performer, title


def unit_noise(rng, center, sigma):
    vec = center + rng.normal(0.0, sigma, size=DIM)
    return vec / np.linalg.norm(vec)


def build_corpus(dest: Path):
    rng = np.random.default_rng(MASTER_SEED)
    inputs = dest / "inputs"
    seed_dir = inputs / "seed"
    inputs.mkdir(parents=True, exist_ok=True)
    seed_dir.mkdir(parents=True, exist_ok=True)

    seed_versions: list[VersionRecord] = []
    embeddings: dict[str, np.ndarray] = {}
    centers: dict[str, np.ndarray] = {}
    meta: dict[str, tuple[str, str]] = {}
    suggestions: list[tuple[str, str]] = []

    for i in range(N_WORKS):
        work_id = f"w{i:03d}"
        performer, title = work_name(rng)
        meta[work_id] = (performer, title)
        center = rng.normal(0.0, 1.0, size=DIM)
        centers[work_id] = center / np.linalg.norm(center)
        n_versions = int(rng.integers(2, 7))
        for j in range(1, n_versions + 1):
            vid = f"sd{i:03d}x{j}"
            seed_versions.append(
                VersionRecord(
                    work_id=work_id,
                    version_id=str(j),
                    video_id=vid,
                    title=title if j == 1 else f"{title} ({'live' if j % 2 else 'take ' + str(j)})",
                    performer=performer,
                    channel=f"{performer} Topic",
                    duration_s=int(rng.integers(120, 420)),
                    upload_date=None,
                    source=Source.SEED,
                )
            )
            embeddings[vid] = unit_noise(rng, centers[work_id], 0.15)
        if rng.random() < 0.3:
            suggestions.append((work_id, f"{title} drum cover"))

    seed = store.Dataset(versions=seed_versions)
    store.write_dataset(seed, seed_dir)
    store.write_queries(inputs / "suggestions.tsv", suggestions)

    suggestion_map: dict[str, list[str]] = {}
    for work_id, text in suggestions:
        suggestion_map.setdefault(work_id, []).append(text)

    # ground truth per candidate video and the crawl stream
    truth: dict[str, RelevanceLabel] = {}
    crawl_lines: list[str] = []
    counter = 0
    work_ids = sorted(meta)
    for work_id in work_ids:
        performer, title = meta[work_id]
        queries = store.formulate_queries(
            performer, title, suggestion_map.get(work_id, [])
        )
        other_work = work_ids[(work_ids.index(work_id) + 37) % N_WORKS]
        other_performer, other_title = meta[other_work]
        specs = []
        if rng.random() < 0.5:
            # user-appropriated upload with an uninformative title: the text
            # proxy sees nothing while the audio is the exact same track
            specs.append((M, f"for my best friend {rng.choice(SURNAMES)} slideshow", "HomeVideos"))
        else:
            specs.append((M, f"{performer} - {title} (Official Video)", f"{performer}VEVO"))
        for kind in ("cover by", "live at the garden,", "acoustic session"):
            specs.append((V, f"{title} {kind} {rng.choice(SURNAMES)}", "CoverNation"))
        specs.append((V, f"{title} drum cover", "DrumWorld"))
        specs.append((V, f"{performer} {title} piano tutorial", "KeysAcademy"))
        specs.append((NM, f"{performer} interview backstage", "TalkTube"))
        for _ in range(4):
            specs.append(
                (NV, f"{other_title} {rng.choice(('cover', 'live', 'remix'))}", f"{other_performer} fans")
            )
        specs.append((NV, f"best of {rng.choice(SURNAMES)} mix", "MixTapes"))
        specs.append((NV, f"{title} {other_title} mashup", "MashLab"))

        for truth_label, cand_title, channel in specs:
            vid = f"yt{counter:05d}"
            counter += 1
            truth[vid] = truth_label
            if truth_label is M:
                base = embeddings[f"sd{work_id[1:]}x1"]
                emb = unit_noise(rng, base, 0.02)
            elif truth_label is V:
                emb = unit_noise(rng, centers[work_id], 0.3)
            elif truth_label is NM:
                emb = unit_noise(rng, rng.normal(0.0, 1.0, size=DIM), 0.1)
            else:
                mix = 0.55 * centers[other_work] + 0.45 * rng.normal(0.0, 0.6, size=DIM)
                emb = unit_noise(rng, mix, 0.1)
            embeddings[vid] = emb
            record = store.CrawlRecord(
                video_id=vid,
                title=cand_title,
                channel=channel,
                duration_s=int(rng.integers(60, 540)),
                originating_query=str(rng.choice(queries)),
                upload_date=None,
            )
            crawl_lines.append(record.to_json())
            if rng.random() < 0.15:  # duplicate line, collapsed at parse time
                crawl_lines.append(record.to_json())
        # one over-cap record per work, dropped at parse time
        long_rec = store.CrawlRecord(
            video_id=f"yt{counter:05d}",
            title=f"{title} full concert",
            channel="ConcertArchive",
            duration_s=int(rng.integers(600, 5400)),
            originating_query=queries[0],
            upload_date=None,
        )
        counter += 1
        crawl_lines.append(long_rec.to_json())

    (inputs / "crawl.jsonl").write_text("\n".join(crawl_lines) + "\n", encoding="utf-8")

    ids = sorted(embeddings)
    rows = np.stack([embeddings[v] for v in ids]).astype(np.float32)
    emb_store = store.EmbeddingStore(
        dim=DIM, rows=rows, index={v: k for k, v in enumerate(ids)}
    )
    store.save_embeddings(emb_store, inputs / "emb.f32", inputs / "emb.idx")
    return seed, truth


def run(args: list[str]) -> None:
    code = cli.main(args)
    if code != 0:
        raise SystemExit(f"pipeline stage failed ({code}): {' '.join(args)}")


def generate_annotations(dest: Path, seed, truth):
    """Worker assignments, overrides and expert curation from ground truth."""
    rng = np.random.default_rng(MASTER_SEED + 1)
    inputs = dest / "inputs"
    golden = dest / "golden"
    hits = annotation.read_hits(golden / "hits.csv", seed)
    seed_work = {v.video_id: v.work_id for v in seed.versions}

    labels_all = list(RelevanceLabel)
    assignments = []
    overrides: list[tuple[str, str]] = []
    for hit in hits:
        n_workers = int(rng.integers(4, 6))
        worker_ids = [f"wk{int(w):03d}" for w in rng.choice(200, size=n_workers, replace=False)]
        force_quality_fail = rng.random() < 0.08
        for idx, worker in enumerate(sorted(worker_ids)):
            labels = {}
            for vid in hit.candidates:
                g = truth[vid]
                if rng.random() < 0.82:
                    labels[vid] = g
                else:
                    labels[vid] = labels_all[int(rng.integers(4))]
            expected = hit.quality_check.expected
            fail_quality = (force_quality_fail and idx == 0) or rng.random() < 0.06
            if fail_quality:
                wrong = V if expected is NV else NV
                labels[hit.quality_check.video_id] = wrong
                if rng.random() < 0.3:
                    overrides.append((hit.hit_id, worker))
            else:
                labels[hit.quality_check.video_id] = expected
            duration = float(int(rng.integers(25, 300)))
            if rng.random() < 0.04:
                duration = float(int(rng.integers(3, 10)))
            justification = ""
            if fail_quality and rng.random() < 0.4:
                justification = "the quality item contains an excerpt, hard call"
            assignments.append(
                annotation.Assignment(
                    hit_id=hit.hit_id,
                    worker_id=worker,
                    labels=labels,
                    duration_s=duration,
                    justification=justification,
                )
            )
    annotation.write_assignments(inputs / "assignments.csv", assignments)
    store.write_tsv(inputs / "overrides.tsv", ("hit_id", "worker_id"), overrides)

    # --- independent majority-vote oracle over the same validation rules ---
    override_set = set(overrides)
    votes_rows = []
    vote_final: dict[tuple[str, str], RelevanceLabel | None] = {}
    for hit in sorted(hits, key=lambda h: h.work_id):
        accepted = []
        for a in assignments:
            if a.hit_id != hit.hit_id:
                continue
            quality_ok = a.labels[hit.quality_check.video_id] == hit.quality_check.expected
            if not quality_ok and (a.hit_id, a.worker_id) not in override_set:
                continue  # rejected: quality fail
            if a.duration_s < 10:
                continue  # rejected: too fast
            if not quality_ok:
                continue  # accepted for payment, excluded from votes
            accepted.append(a)
        for vid in hit.candidates:
            counts = Counter(a.labels[vid] for a in accepted)
            final = None
            if counts:
                top = counts.most_common()
                if top[0][1] >= 3 and (len(top) == 1 or top[0][1] > top[1][1]):
                    final = top[0][0]
            vote_final[(hit.work_id, vid)] = final
            votes_rows.append(
                [
                    hit.work_id,
                    vid,
                    final.canonical if final is not None else "undecided",
                    str(counts.get(NM, 0)),
                    str(counts.get(NV, 0)),
                    str(counts.get(V, 0)),
                    str(counts.get(M, 0)),
                ]
            )
    store.write_tsv(golden / "votes_oracle.tsv", annotation.VOTES_HEADER, votes_rows)

    # --- expert curation against ground truth ---
    curation_rng = np.random.default_rng(MASTER_SEED + 2)
    curation: list[annotation.CurationRow] = []
    undecided = [key for key, final in sorted(vote_final.items()) if final is None]
    skip_expert = set(
        tuple(undecided[i]) for i in curation_rng.choice(
            len(undecided), size=min(3, len(undecided)), replace=False
        )
    ) if undecided else set()
    wrong_votes = [
        key
        for key, final in sorted(vote_final.items())
        if final is not None and final != truth[key[1]]
    ]
    curate_wrong = {
        tuple(wrong_votes[i])
        for i in curation_rng.choice(
            len(wrong_votes), size=min(15, len(wrong_votes)), replace=False
        )
    } if wrong_votes else set()
    no_music_decided = {
        key for key, final in vote_final.items() if final is NM
    }

    seen_videos = set()
    for (work_id, vid), final in sorted(vote_final.items()):
        if vid in seen_videos:
            continue
        needs = (
            (final is None and (work_id, vid) not in skip_expert)
            or (work_id, vid) in curate_wrong
            or (work_id, vid) in no_music_decided
        )
        if not needs:
            continue
        seen_videos.add(vid)
        g = truth[vid]
        if g is V:
            unc = str(curation_rng.choice(VERSION_UNCERTAINTY))
        elif g is NV:
            unc = str(curation_rng.choice(NEGATIVE_UNCERTAINTY))
        else:
            unc = "none"
        note = "resolved after discussion" if final is None and curation_rng.random() < 0.2 else ""
        curation.append(
            annotation.CurationRow(
                video_id=vid,
                relevance=g,
                uncertainty=uncertainty_class(unc),
                note=note,
            )
        )
    annotation.write_curation(inputs / "curation.tsv", curation)

    # --- exclusions: seed versions that are neither query nor lowest ---
    query_of = {h.work_id: h.query_version.version_id for h in hits}
    excluded = []
    for v in seed.versions:
        if len(excluded) >= 3:
            break
        if v.version_id in ("1", query_of.get(v.work_id)):
            continue
        if int(v.version_id) >= 3:
            excluded.append(v.video_id)
    excluded.append("yt00007")  # one candidate exclusion
    (inputs / "exclusions.txt").write_text("\n".join(excluded) + "\n", encoding="utf-8")


def main() -> None:
    global MASTER_SEED
    dest = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "e2e"
    )
    if len(sys.argv) > 2:
        MASTER_SEED = int(sys.argv[2])
    if dest.exists():
        shutil.rmtree(dest)
    inputs = dest / "inputs"
    golden = dest / "golden"
    golden.mkdir(parents=True, exist_ok=True)

    seed, truth = build_corpus(dest)

    run(["queries", "--seed", str(inputs / "seed"),
         "--suggestions", str(inputs / "suggestions.tsv"),
         "--out", str(golden / "queries.tsv")])
    run(["ingest", "--crawl", str(inputs / "crawl.jsonl"),
         "--queries", str(golden / "queries.tsv"),
         "--out", str(golden / "candidates.tsv")])
    run(["score", "--seed", str(inputs / "seed"),
         "--candidates", str(golden / "candidates.tsv"),
         "--embeddings-matrix", str(inputs / "emb.f32"),
         "--embeddings-index", str(inputs / "emb.idx"),
         "--out", str(golden / "scores.tsv")])
    run(["sample", "--scores", str(golden / "scores.tsv"),
         "--k", "3", "--out", str(golden / "sampled.tsv")])
    run(["hits", "--sampled", str(golden / "sampled.tsv"),
         "--seed", str(inputs / "seed"),
         "--rng-seed", str(RNG_SEED), "--out", str(golden / "hits.csv")])

    generate_annotations(dest, seed, truth)

    run(["votes", "--hits", str(golden / "hits.csv"),
         "--assignments", str(inputs / "assignments.csv"),
         "--seed", str(inputs / "seed"),
         "--overrides", str(inputs / "overrides.tsv"),
         "--out", str(golden / "votes.tsv")])

    oracle = (golden / "votes_oracle.tsv").read_bytes()
    actual = (golden / "votes.tsv").read_bytes()
    if oracle != actual:
        raise SystemExit("pipeline votes.tsv does not match the oracle vote table")
    (golden / "votes_oracle.tsv").unlink()

    run(["benchmark", "--votes", str(golden / "votes.tsv"),
         "--sampled", str(golden / "sampled.tsv"),
         "--candidates", str(golden / "candidates.tsv"),
         "--seed", str(inputs / "seed"),
         "--curation", str(inputs / "curation.tsv"),
         "--queries-from", str(golden / "hits.csv"),
         "--exclude", str(inputs / "exclusions.txt"),
         "--variant", "yt2q",
         "--labels-out", str(golden / "labels.tsv"),
         "--out", str(golden / "benchmark.tsv")])
    run(["eval", "--benchmark", str(golden / "benchmark.tsv"),
         "--embeddings-matrix", str(inputs / "emb.f32"),
         "--embeddings-index", str(inputs / "emb.idx"),
         "--labels", str(golden / "labels.tsv"),
         "--report-json", str(golden / "report.json"),
         "--report-md", str(golden / "report.md")])

    config_text = "\n".join(
        [
            "duration_cap_s = 600",
            "k_per_group = 3",
            "vote_threshold = 3",
            "min_assignment_duration_s = 10",
            "significance_alpha = 0.01",
            f"rng_seed = {RNG_SEED}",
            'music_agg = "mean"',
            "",
        ]
    )
    (inputs / "config.toml").write_text(config_text, encoding="utf-8")
    print(f"fixture written to {dest}")


if __name__ == "__main__":
    main()
