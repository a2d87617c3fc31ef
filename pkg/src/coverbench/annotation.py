"""Annotation tasks, assignment validation, vote aggregation, and curation.

One task (HIT) per work presents a query version, the sampled candidates and
one quality-check item with a known answer.  Worker assignments are rejected
when the quality check fails or the assignment was completed in under the
minimum duration; accepted labels aggregate by majority vote (at least three
equal labels and a strict plurality).  Expert curation overrides votes and
attaches uncertainty classes.
"""

from __future__ import annotations

import enum
import csv
import hashlib
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataMismatchError, MissingInputError, SchemaError
from .model import (
    RelevanceLabel,
    UncertaintyClass,
    VersionRecord,
    uncertainty_class,
    version_sort_key,
)
from .sampling import GroupAssignment
from .store import Dataset, LabelRecord, atomic_write_text, read_tsv, write_tsv

logger = logging.getLogger(__name__)

QUALITY_EXPECTED = (RelevanceLabel.VERSION, RelevanceLabel.NON_VERSION)


@dataclass(frozen=True)
class QualityCheck:
    video_id: str
    expected: RelevanceLabel

    def __post_init__(self) -> None:
        if self.expected not in QUALITY_EXPECTED:
            raise SchemaError(
                f"quality check expected label must be version or non_version, "
                f"got {self.expected.canonical}"
            )


@dataclass(frozen=True)
class Hit:
    """One annotation task: query version, candidates, quality check."""

    hit_id: str
    work_id: str
    query_version: VersionRecord
    candidates: tuple[str, ...]
    quality_check: QualityCheck
    perm_seed: int

    def __post_init__(self) -> None:
        if not self.candidates:
            raise SchemaError(f"hit {self.hit_id!r} has no candidates")
        items = set(self.candidates)
        if len(items) != len(self.candidates):
            raise SchemaError(f"hit {self.hit_id!r} has duplicate candidates")
        if self.quality_check.video_id in items:
            raise SchemaError(
                f"hit {self.hit_id!r}: quality check collides with a candidate"
            )

    @property
    def item_ids(self) -> tuple[str, ...]:
        """Candidates plus the quality item, in construction order."""
        return self.candidates + (self.quality_check.video_id,)

    def presentation_order(self) -> tuple[str, ...]:
        """Deterministic shuffled display order (quality item blended in)."""
        rng = np.random.default_rng(self.perm_seed)
        items = list(self.item_ids)
        perm = rng.permutation(len(items))
        return tuple(items[i] for i in perm)


def _work_rng(rng_seed: int, work_id: str) -> np.random.Generator:
    digest = hashlib.sha256(work_id.encode("utf-8")).digest()
    return np.random.default_rng([rng_seed, int.from_bytes(digest[:8], "big")])


def build_hits(
    sampled: Sequence[GroupAssignment],
    seed: Dataset,
    rng_seed: int,
) -> list[Hit]:
    """One hit per sampled work, deterministic given ``rng_seed``.

    The query version is a seeded random choice among the work's seed
    versions; the quality item is another seed version, labeled version
    (same work) or non_version (different work).
    """
    by_work: dict[str, list[str]] = {}
    for a in sampled:
        cands = by_work.setdefault(a.work_id, [])
        if a.video_id not in cands:
            cands.append(a.video_id)

    seed_by_work = seed.versions_by_work()
    for work_id in seed_by_work:
        seed_by_work[work_id] = sorted(
            seed_by_work[work_id], key=lambda v: version_sort_key(v.version_id)
        )
    all_works = sorted(seed_by_work)

    hits: list[Hit] = []
    for work_id in sorted(by_work):
        candidates = by_work[work_id]
        if not candidates:
            logger.warning("work %s has no candidates; excluded from hits", work_id)
            continue
        own = seed_by_work.get(work_id)
        if not own:
            raise DataMismatchError(
                f"work {work_id!r} has no seed versions to draw a query from"
            )
        rng = _work_rng(rng_seed, work_id)
        query = own[int(rng.integers(len(own)))]

        candidate_set = set(candidates)
        other_works = [w for w in all_works if w != work_id]
        quality = _draw_quality(rng, work_id, own, query, other_works, seed_by_work, candidate_set)

        hits.append(
            Hit(
                hit_id=f"hit_{work_id}",
                work_id=work_id,
                query_version=query,
                candidates=tuple(candidates),
                quality_check=quality,
                perm_seed=int(rng.integers(2**31)),
            )
        )
    return hits


def _draw_quality(rng, work_id, own, query, other_works, seed_by_work, candidate_set):
    same_work_pool = [v for v in own if v.version_id != query.version_id]
    for _ in range(64):
        want_version = bool(rng.integers(2)) if other_works and same_work_pool else bool(same_work_pool)
        if want_version and same_work_pool:
            pick = same_work_pool[int(rng.integers(len(same_work_pool)))]
            expected = RelevanceLabel.VERSION
        elif other_works:
            other = other_works[int(rng.integers(len(other_works)))]
            pool = seed_by_work[other]
            pick = pool[int(rng.integers(len(pool)))]
            expected = RelevanceLabel.NON_VERSION
        else:
            break
        if pick.video_id not in candidate_set and pick.video_id != query.video_id:
            return QualityCheck(video_id=pick.video_id, expected=expected)
    raise DataMismatchError(
        f"work {work_id!r}: could not draw a quality-check version distinct "
        "from the candidates"
    )


# ---------------------------------------------------------------------------
# assignments and validation


@dataclass(frozen=True)
class Assignment:
    """One worker's response to one hit."""

    hit_id: str
    worker_id: str
    labels: Mapping[str, RelevanceLabel]
    duration_s: float
    justification: str = ""


class ValidationStatus(enum.Enum):
    ACCEPT = "accept"
    ACCEPT_EXCLUDED = "accept_excluded"
    REJECT = "reject"


class RejectReason(enum.Enum):
    QUALITY_FAIL = "quality_fail"
    TOO_FAST = "too_fast"


@dataclass(frozen=True)
class ValidationResult:
    status: ValidationStatus
    reason: RejectReason | None = None


def validate_assignment(
    assignment: Assignment,
    hit: Hit,
    min_duration_s: int = 10,
    accept_quality_override: bool = False,
) -> ValidationResult:
    """Accept or reject one assignment against its hit.

    A mislabeled quality item rejects (unless overridden, which accepts the
    assignment for payment but keeps it out of all votes); completing the
    task in under ``min_duration_s`` seconds always rejects.
    """
    if assignment.hit_id != hit.hit_id:
        raise DataMismatchError(
            f"assignment for hit {assignment.hit_id!r} validated against "
            f"hit {hit.hit_id!r}"
        )
    expected_items = set(hit.item_ids)
    got_items = set(assignment.labels)
    if got_items != expected_items:
        missing = sorted(expected_items - got_items)
        extra = sorted(got_items - expected_items)
        raise SchemaError(
            f"assignment by {assignment.worker_id!r} on {hit.hit_id!r} has an "
            f"incomplete label map (missing {missing}, extra {extra})"
        )
    quality_ok = (
        assignment.labels[hit.quality_check.video_id] == hit.quality_check.expected
    )
    if not quality_ok and not accept_quality_override:
        return ValidationResult(ValidationStatus.REJECT, RejectReason.QUALITY_FAIL)
    if assignment.duration_s < min_duration_s:
        return ValidationResult(ValidationStatus.REJECT, RejectReason.TOO_FAST)
    if not quality_ok:
        return ValidationResult(ValidationStatus.ACCEPT_EXCLUDED)
    return ValidationResult(ValidationStatus.ACCEPT)


# ---------------------------------------------------------------------------
# majority voting


@dataclass(frozen=True)
class VoteResult:
    """Aggregated worker decision for one candidate."""

    work_id: str
    video_id: str
    final: RelevanceLabel | None
    tally: Mapping[RelevanceLabel, int]

    @property
    def is_decided(self) -> bool:
        return self.final is not None


def majority_vote(
    labels: Sequence[RelevanceLabel],
    threshold: int = 3,
    *,
    work_id: str = "",
    video_id: str = "",
) -> VoteResult:
    """Label with at least ``threshold`` votes and a strict plurality, else undecided."""
    tally: dict[RelevanceLabel, int] = {}
    for label in labels:
        tally[label] = tally.get(label, 0) + 1
    final: RelevanceLabel | None = None
    if tally:
        best = max(tally.values())
        leaders = [l for l, c in tally.items() if c == best]
        if best >= threshold and len(leaders) == 1:
            final = leaders[0]
    return VoteResult(work_id=work_id, video_id=video_id, final=final, tally=tally)


@dataclass
class VotesOutcome:
    votes: list[VoteResult]
    n_assignments: int = 0
    n_accepted: int = 0
    n_excluded: int = 0
    rejected: list[tuple[str, str, RejectReason]] = field(default_factory=list)
    accepted_by_hit: dict[str, list[Assignment]] = field(default_factory=dict)


def aggregate_votes(
    hits: Sequence[Hit],
    assignments: Sequence[Assignment],
    threshold: int = 3,
    min_duration_s: int = 10,
    overrides: Iterable[tuple[str, str]] = (),
) -> VotesOutcome:
    """Validate assignments and majority-vote every candidate of every hit.

    ``overrides`` lists (hit_id, worker_id) pairs whose failed quality checks
    are accepted for payment; their labels still never enter votes.
    """
    hit_by_id = {h.hit_id: h for h in hits}
    override_set = set(overrides)
    accepted: dict[str, list[Assignment]] = {h.hit_id: [] for h in hits}
    outcome = VotesOutcome(votes=[])
    for a in assignments:
        hit = hit_by_id.get(a.hit_id)
        if hit is None:
            raise DataMismatchError(f"assignment references unknown hit {a.hit_id!r}")
        result = validate_assignment(
            a,
            hit,
            min_duration_s=min_duration_s,
            accept_quality_override=(a.hit_id, a.worker_id) in override_set,
        )
        outcome.n_assignments += 1
        if result.status is ValidationStatus.ACCEPT:
            outcome.n_accepted += 1
            accepted[a.hit_id].append(a)
        elif result.status is ValidationStatus.ACCEPT_EXCLUDED:
            outcome.n_excluded += 1
        else:
            outcome.rejected.append((a.hit_id, a.worker_id, result.reason))

    outcome.accepted_by_hit = accepted
    for hit in sorted(hits, key=lambda h: h.work_id):
        for video_id in hit.candidates:
            labels = [a.labels[video_id] for a in accepted[hit.hit_id]]
            outcome.votes.append(
                majority_vote(
                    labels,
                    threshold=threshold,
                    work_id=hit.work_id,
                    video_id=video_id,
                )
            )
    return outcome


# ---------------------------------------------------------------------------
# expert curation


@dataclass(frozen=True)
class CurationRow:
    """One expert decision entered during curation."""

    video_id: str
    relevance: RelevanceLabel
    uncertainty: UncertaintyClass
    note: str = ""


def merge_curation(
    votes: Sequence[VoteResult], expert: Sequence[CurationRow]
) -> list[LabelRecord]:
    """Final label table: expert decisions override votes where present.

    Undecided candidates without an expert row are flagged ``incomplete``;
    decided votes contradicted by the expert are flagged ``worker_error``.
    Conflicting duplicate expert rows are an error; exact duplicates collapse.
    """
    by_video: dict[str, CurationRow] = {}
    for row in expert:
        prev = by_video.get(row.video_id)
        if prev is not None and prev != row:
            raise SchemaError(
                f"conflicting expert rows for video {row.video_id!r}: "
                f"{prev.relevance.canonical}/{prev.uncertainty.name} vs "
                f"{row.relevance.canonical}/{row.uncertainty.name}"
            )
        by_video[row.video_id] = row

    known = {v.video_id for v in votes}
    unknown = sorted(set(by_video) - known)
    if unknown:
        raise DataMismatchError(
            f"expert rows reference video ids absent from the vote table: "
            f"{unknown[:10]}"
        )

    out: list[LabelRecord] = []
    for vote in votes:
        row = by_video.get(vote.video_id)
        if row is not None:
            flag = (
                "worker_error"
                if vote.final is not None and vote.final != row.relevance
                else ""
            )
            out.append(
                LabelRecord(
                    work_id=vote.work_id,
                    video_id=vote.video_id,
                    relevance=row.relevance,
                    uncertainty=row.uncertainty,
                    flag=flag,
                )
            )
        else:
            out.append(
                LabelRecord(
                    work_id=vote.work_id,
                    video_id=vote.video_id,
                    relevance=vote.final,
                    uncertainty=None,
                    flag="" if vote.final is not None else "incomplete",
                )
            )
    return out


# ---------------------------------------------------------------------------
# hits / assignments / votes / curation files

HITS_HEADER = (
    "hit_id",
    "work_id",
    "query_version_id",
    "query_video_id",
    "perm_seed",
    "position",
    "item_video_id",
    "item_role",
    "quality_expected",
)

ASSIGNMENTS_HEADER = (
    "hit_id",
    "worker_id",
    "item_video_id",
    "label",
    "duration_s",
    "justification",
)

VOTES_HEADER = (
    "work_id",
    "video_id",
    "final",
    "n_no_music",
    "n_non_version",
    "n_version",
    "n_match",
)

CURATION_HEADER = ("video_id", "relevance", "uncertainty", "note")


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_hits(path: str | Path, hits: Sequence[Hit]) -> None:
    """hits.csv: one row per item; ``position`` is the presentation slot."""
    rows = []
    for hit in hits:
        position_of = {
            video_id: pos for pos, video_id in enumerate(hit.presentation_order())
        }
        for video_id in hit.item_ids:
            is_quality = video_id == hit.quality_check.video_id
            rows.append(
                [
                    hit.hit_id,
                    hit.work_id,
                    hit.query_version.version_id,
                    hit.query_version.video_id,
                    str(hit.perm_seed),
                    str(position_of[video_id]),
                    video_id,
                    "quality_check" if is_quality else "candidate",
                    hit.quality_check.expected.canonical if is_quality else "",
                ]
            )
    atomic_write_text(path, _csv_text(HITS_HEADER, rows))


def read_hits(path: str | Path, seed: Dataset) -> list[Hit]:
    """Rebuild hits from hits.csv; query metadata resolves against the seed."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(HITS_HEADER):
            raise SchemaError(f"{path}: unexpected header {header}")
        rows = list(reader)

    versions = {(v.work_id, v.version_id): v for v in seed.versions}
    grouped: dict[str, list[list[str]]] = {}
    order: list[str] = []
    for row in rows:
        if len(row) != len(HITS_HEADER):
            raise SchemaError(f"{path}: bad row width {len(row)}")
        if row[0] not in grouped:
            order.append(row[0])
        grouped.setdefault(row[0], []).append(row)

    hits = []
    for hit_id in order:
        items = grouped[hit_id]  # file order is construction order
        first = items[0]
        work_id = first[1]
        query = versions.get((work_id, first[2]))
        if query is None:
            raise DataMismatchError(
                f"{path}: hit {hit_id!r} query version {first[2]!r} not in seed dataset"
            )
        candidates = []
        quality = None
        for row in items:
            if row[7] == "quality_check":
                quality = QualityCheck(
                    video_id=row[6], expected=RelevanceLabel.parse(row[8])
                )
            elif row[7] == "candidate":
                candidates.append(row[6])
            else:
                raise SchemaError(f"{path}: unknown item role {row[7]!r}")
        if quality is None:
            raise SchemaError(f"{path}: hit {hit_id!r} has no quality-check row")
        hits.append(
            Hit(
                hit_id=hit_id,
                work_id=work_id,
                query_version=query,
                candidates=tuple(candidates),
                quality_check=quality,
                perm_seed=int(first[4]),
            )
        )
    return hits


def write_assignments(path: str | Path, assignments: Sequence[Assignment]) -> None:
    rows = []
    for a in assignments:
        for video_id, label in a.labels.items():
            rows.append(
                [
                    a.hit_id,
                    a.worker_id,
                    video_id,
                    label.canonical,
                    format(a.duration_s, "g"),
                    a.justification,
                ]
            )
    atomic_write_text(path, _csv_text(ASSIGNMENTS_HEADER, rows))


def read_assignments(path: str | Path) -> list[Assignment]:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(ASSIGNMENTS_HEADER):
            raise SchemaError(f"{path}: unexpected header {header}")
        rows = list(reader)

    grouped: dict[tuple[str, str], dict] = {}
    order: list[tuple[str, str]] = []
    for row in rows:
        if len(row) != len(ASSIGNMENTS_HEADER):
            raise SchemaError(f"{path}: bad row width {len(row)}")
        key = (row[0], row[1])
        if key not in grouped:
            order.append(key)
            grouped[key] = {"labels": {}, "duration": row[4], "justification": row[5]}
        grouped[key]["labels"][row[2]] = RelevanceLabel.parse(row[3])
    return [
        Assignment(
            hit_id=key[0],
            worker_id=key[1],
            labels=grouped[key]["labels"],
            duration_s=float(grouped[key]["duration"]),
            justification=grouped[key]["justification"],
        )
        for key in order
    ]


def write_votes(path: str | Path, votes: Sequence[VoteResult]) -> None:
    rows = []
    for v in votes:
        rows.append(
            [
                v.work_id,
                v.video_id,
                v.final.canonical if v.final is not None else "undecided",
                str(v.tally.get(RelevanceLabel.NO_MUSIC, 0)),
                str(v.tally.get(RelevanceLabel.NON_VERSION, 0)),
                str(v.tally.get(RelevanceLabel.VERSION, 0)),
                str(v.tally.get(RelevanceLabel.MATCH, 0)),
            ]
        )
    write_tsv(path, VOTES_HEADER, rows)


def read_votes(path: str | Path) -> list[VoteResult]:
    votes = []
    for row in read_tsv(path, VOTES_HEADER):
        tally = {
            RelevanceLabel.NO_MUSIC: int(row[3]),
            RelevanceLabel.NON_VERSION: int(row[4]),
            RelevanceLabel.VERSION: int(row[5]),
            RelevanceLabel.MATCH: int(row[6]),
        }
        tally = {k: v for k, v in tally.items() if v}
        final = None if row[2] == "undecided" else RelevanceLabel.parse(row[2])
        votes.append(VoteResult(work_id=row[0], video_id=row[1], final=final, tally=tally))
    return votes


def write_curation(path: str | Path, rows: Sequence[CurationRow]) -> None:
    write_tsv(
        path,
        CURATION_HEADER,
        (
            [r.video_id, r.relevance.canonical, r.uncertainty.name, r.note]
            for r in rows
        ),
    )


def read_curation(path: str | Path) -> list[CurationRow]:
    return [
        CurationRow(
            video_id=row[0],
            relevance=RelevanceLabel.parse(row[1]),
            uncertainty=uncertainty_class(row[2]),
            note=row[3],
        )
        for row in read_tsv(path, CURATION_HEADER)
    ]
