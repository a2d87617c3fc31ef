#!/usr/bin/env python3
"""Annotation-quality analysis over pipeline artifacts.

Prints per-label and per-group counts, the assignment validation summary,
worker agreement (Krippendorff's alpha) and the aggregated-vs-expert
association (Kendall's tau-b) for the curated subset.

Usage:
  python scripts/analyze_agreement.py --seed seed/ --hits hits.csv \
      --assignments assignments.csv [--curation curation.tsv] \
      [--overrides overrides.tsv] [--sampled sampled.tsv]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from coverbench import annotation, store  # noqa: E402
from coverbench.agreement import AlphaLevel, agreement_report  # noqa: E402
from coverbench.model import RelevanceLabel, SamplingGroup  # noqa: E402
from coverbench.sampling import read_sampled  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", required=True)
    parser.add_argument("--hits", required=True)
    parser.add_argument("--assignments", required=True)
    parser.add_argument("--curation")
    parser.add_argument("--overrides")
    parser.add_argument("--sampled")
    parser.add_argument("--threshold", type=int, default=3)
    parser.add_argument("--min-duration", type=int, default=10)
    args = parser.parse_args()

    seed = store.read_dataset(args.seed)
    hits = annotation.read_hits(args.hits, seed)
    assignments = annotation.read_assignments(args.assignments)
    overrides = []
    if args.overrides:
        overrides = [
            (r[0], r[1])
            for r in store.read_tsv(args.overrides, ("hit_id", "worker_id"))
        ]
    outcome = annotation.aggregate_votes(
        hits,
        assignments,
        threshold=args.threshold,
        min_duration_s=args.min_duration,
        overrides=overrides,
    )
    print(
        f"assignments: {outcome.n_accepted}/{outcome.n_assignments} accepted, "
        f"{outcome.n_excluded} accepted-but-excluded, {len(outcome.rejected)} rejected"
    )

    curation = {}
    if args.curation:
        curation = {
            c.video_id: c for c in annotation.read_curation(args.curation)
        }
    labels = annotation.merge_curation(outcome.votes, list(curation.values()))

    counts = {label: 0 for label in RelevanceLabel}
    undecided = 0
    for l in labels:
        if l.relevance is None:
            undecided += 1
        else:
            counts[l.relevance] += 1
    print("final labels:")
    for label in RelevanceLabel:
        print(f"  {label.canonical:>12}: {counts[label]}")
    print(f"  {'undecided':>12}: {undecided}")

    if args.sampled:
        group_counts = {g: 0 for g in SamplingGroup}
        group_of = {
            (a.work_id, a.video_id): a.group for a in read_sampled(args.sampled)
        }
        for l in labels:
            group = group_of.get((l.work_id, l.video_id))
            if group is not None:
                group_counts[group] += 1
        print("labeled candidates per sampling group:")
        for group in SamplingGroup:
            print(f"  {group.value:>12}: {group_counts[group]}")

    matrix = []
    aggregated = []
    expert = []
    vote_of = {(v.work_id, v.video_id): v for v in outcome.votes}
    for hit in sorted(hits, key=lambda h: h.work_id):
        accepted = outcome.accepted_by_hit[hit.hit_id]
        for vid in hit.candidates:
            matrix.append([int(a.labels[vid]) for a in accepted])
            vote = vote_of[(hit.work_id, vid)]
            aggregated.append(int(vote.final) if vote.final is not None else None)
            expert.append(
                int(curation[vid].relevance) if vid in curation else None
            )

    report = agreement_report(matrix, aggregated, expert, AlphaLevel.ORDINAL)
    print(f"worker agreement (ordinal alpha): {report.krippendorff_alpha:.4f}")
    print(
        f"aggregated vs expert (tau-b over curated, decided items): "
        f"{report.kendall_tau:.4f}"
    )
    print(f"items: {report.n_items}, rater slots: {report.n_raters}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
