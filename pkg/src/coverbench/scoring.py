"""Pairwise similarities and per-candidate score aggregation.

For a work with query versions Q and a candidate c, the music score is the
arithmetic mean of the cosine similarities between c's embedding and every
query embedding; the text score is the maximum matching confidence over the
same pairs.  The built-in text matcher is a token-set-ratio scorer; neural
matchers plug in through a subprocess file contract.
"""

from __future__ import annotations

import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import DataMismatchError, MatcherError, SchemaError
from .store import (
    Dataset,
    EmbeddingStore,
    atomic_write_text,
    format_float,
    read_tsv,
    write_tsv,
)

# ---------------------------------------------------------------------------
# primitives


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    ua = np.asarray(u, dtype=np.float64)
    va = np.asarray(v, dtype=np.float64)
    if ua.ndim != 1 or va.ndim != 1 or ua.shape != va.shape:
        raise DataMismatchError(
            f"cosine requires equal-length vectors, got shapes {ua.shape} and {va.shape}"
        )
    nu = float(np.linalg.norm(ua))
    nv = float(np.linalg.norm(va))
    if nu == 0.0 or nv == 0.0:
        raise DataMismatchError("cosine is undefined for zero vectors")
    return float(np.clip(np.dot(ua, va) / (nu * nv), -1.0, 1.0))


def _lcs_length(a: str, b: str) -> int:
    # two-row dynamic program; strings here are short title-like texts
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0] * (len(b) + 1)
        for j, cb in enumerate(b, start=1):
            if ca == cb:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def _indel_similarity(a: str, b: str) -> float:
    """Normalized insert/delete similarity: 2*LCS / (|a| + |b|); 1.0 for two empties."""
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 2.0 * _lcs_length(a, b) / total


def fuzzy_match(a: str, b: str) -> float:
    """Token-set-ratio similarity in [0, 1].

    Case-folds and tokenizes on whitespace, then compares the sorted token
    intersection string against each intersection-plus-remainder string (and
    the two remainder strings against each other), returning the maximum
    normalized edit similarity.  Equal token sets always score 1.0; an empty
    side against a non-empty side scores 0.0.
    """
    set_a = set(a.casefold().split())
    set_b = set(b.casefold().split())
    if set_a == set_b:
        return 1.0
    if not set_a or not set_b:
        return 0.0
    sect = " ".join(sorted(set_a & set_b))
    rest_a = " ".join(sorted(set_a - set_b))
    rest_b = " ".join(sorted(set_b - set_a))
    combined_a = (sect + " " + rest_a).strip()
    combined_b = (sect + " " + rest_b).strip()
    return max(
        _indel_similarity(sect, combined_a),
        _indel_similarity(sect, combined_b),
        _indel_similarity(combined_a, combined_b),
    )


# ---------------------------------------------------------------------------
# matchers

MatcherPair = tuple[str, str, str, str]
"""(cand_title, cand_channel, query_title, query_performer)"""

PAIRS_HEADER = ("cand_title", "cand_channel", "query_title", "query_performer")


class TextMatcher(Protocol):
    def confidences(self, pairs: Sequence[MatcherPair]) -> list[float]:
        """One confidence in [0, 1] per pair, preserving order."""


class FuzzyMatcher:
    """Built-in baseline matcher: token-set ratio over title/channel text."""

    def confidences(self, pairs: Sequence[MatcherPair]) -> list[float]:
        out = []
        for cand_title, cand_channel, query_title, query_performer in pairs:
            cand_text = f"{cand_title} {cand_channel}".strip()
            query_text = f"{query_performer} {query_title}".strip()
            out.append(fuzzy_match(cand_text, query_text))
        return out


def write_matcher_pairs(path: str | Path, pairs: Sequence[MatcherPair]) -> None:
    write_tsv(path, PAIRS_HEADER, [list(p) for p in pairs])


def _parse_confidences(text: str, n_pairs: int, source: str) -> list[float]:
    lines = [l for l in text.splitlines() if l.strip() != ""]
    if len(lines) != n_pairs:
        raise MatcherError(
            f"{source}: returned {len(lines)} confidences for {n_pairs} pairs"
        )
    out: list[float] = []
    for i, line in enumerate(lines, start=1):
        try:
            value = float(line.strip())
        except ValueError:
            raise MatcherError(f"{source}: row {i} is not a number: {line!r}") from None
        if not np.isfinite(value) or not 0.0 <= value <= 1.0:
            raise MatcherError(
                f"{source}: row {i} confidence {value} outside [0, 1]"
            )
        out.append(value)
    return out


def run_external_matcher(
    pairs_path: str | Path,
    command: Sequence[str],
    out_path: str | Path | None = None,
) -> list[float]:
    """Run a matcher command over a pairs file; one confidence per row.

    The command receives the pairs TSV on stdin and must print one decimal
    confidence per input row to stdout, in order.
    """
    pairs_path = Path(pairs_path)
    rows = read_tsv(pairs_path, PAIRS_HEADER)
    with open(pairs_path, encoding="utf-8") as fh:
        proc = subprocess.run(
            list(command), stdin=fh, capture_output=True, text=True
        )
    if proc.returncode != 0:
        raise MatcherError(
            f"matcher command {command!r} failed with exit {proc.returncode}: "
            f"{proc.stderr.strip()[:500]}"
        )
    confs = _parse_confidences(proc.stdout, len(rows), f"matcher {command!r}")
    if out_path is not None:
        atomic_write_text(out_path, "".join(format_float(c) + "\n" for c in confs))
    return confs


@dataclass
class ExternalMatcher:
    """Subprocess matcher honoring the pairs-file contract."""

    command: Sequence[str]

    def confidences(self, pairs: Sequence[MatcherPair]) -> list[float]:
        if not pairs:
            return []
        with tempfile.TemporaryDirectory(prefix="coverbench-matcher-") as tmp:
            pairs_path = Path(tmp) / "pairs.tsv"
            write_matcher_pairs(pairs_path, pairs)
            return run_external_matcher(pairs_path, self.command)


# ---------------------------------------------------------------------------
# per-work aggregation


@dataclass(frozen=True)
class QueryVersion:
    version_id: str
    video_id: str
    title: str
    performer: str


@dataclass(frozen=True)
class WorkQuerySet:
    """The seed versions of one work that candidates are scored against."""

    work_id: str
    queries: tuple[QueryVersion, ...]

    def __post_init__(self) -> None:
        if not self.queries:
            raise DataMismatchError(f"work {self.work_id!r} has no query versions")


def work_query_set(seed: Dataset, work_id: str) -> WorkQuerySet:
    versions = [v for v in seed.versions if v.work_id == work_id]
    if not versions:
        raise DataMismatchError(f"work {work_id!r} has no versions in the seed dataset")
    return WorkQuerySet(
        work_id=work_id,
        queries=tuple(
            QueryVersion(v.version_id, v.video_id, v.title, v.performer)
            for v in versions
        ),
    )


@dataclass(frozen=True)
class ScoreRecord:
    """Aggregated music and text scores of one candidate for one work."""

    work_id: str
    video_id: str
    s_music: float
    s_text: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.s_music) or not -1.0 <= self.s_music <= 1.0:
            raise SchemaError(
                f"s_music must be finite in [-1, 1], got {self.s_music} "
                f"for {self.video_id!r}"
            )
        if not np.isfinite(self.s_text) or not 0.0 <= self.s_text <= 1.0:
            raise SchemaError(
                f"s_text must be finite in [0, 1], got {self.s_text} "
                f"for {self.video_id!r}"
            )


def aggregate_music(
    candidate_video_id: str,
    queries: WorkQuerySet,
    store: EmbeddingStore,
    agg: str = "mean",
) -> float:
    """Aggregate candidate-to-query cosine similarities (mean by default).

    ``agg="max"`` is available for comparison runs; the pipeline default is
    the mean.
    """
    if agg not in ("mean", "max"):
        raise SchemaError(f"unknown music aggregation {agg!r}")
    cand = store.vector(candidate_video_id)
    sims = [cosine(cand, store.vector(q.video_id)) for q in queries.queries]
    return float(np.mean(sims)) if agg == "mean" else float(max(sims))


def aggregate_text(
    candidate_title: str,
    candidate_channel: str,
    queries: WorkQuerySet,
    matcher: TextMatcher,
) -> float:
    """Maximum matching confidence between the candidate and any query version."""
    pairs = [
        (candidate_title, candidate_channel, q.title, q.performer)
        for q in queries.queries
    ]
    confs = matcher.confidences(pairs)
    _check_confidences(confs, pairs, queries.work_id)
    return max(confs)


def _check_confidences(confs, pairs, work_id):
    if len(confs) != len(pairs):
        raise MatcherError(
            f"matcher returned {len(confs)} confidences for {len(pairs)} pairs "
            f"(work {work_id!r})"
        )
    for conf, pair in zip(confs, pairs):
        if not np.isfinite(conf) or not 0.0 <= conf <= 1.0:
            raise MatcherError(
                f"confidence {conf} outside [0, 1] for pair "
                f"(cand {pair[0]!r}, query {pair[2]!r}) of work {work_id!r}"
            )


def score_work(
    queries: WorkQuerySet,
    candidates: Sequence,
    store: EmbeddingStore,
    matcher: TextMatcher,
    music_agg: str = "mean",
) -> list[ScoreRecord]:
    """One ScoreRecord per candidate, in input order.

    Candidates need ``video_id``, ``title`` and ``channel`` attributes
    (VersionRecord and CrawlRecord both qualify).  Text confidences for all
    candidate/query pairs go through the matcher in one batch.
    """
    if not candidates:
        raise DataMismatchError(f"work {queries.work_id!r}: empty candidate list")
    pairs: list[MatcherPair] = []
    for cand in candidates:
        for q in queries.queries:
            pairs.append((cand.title, cand.channel, q.title, q.performer))
    confs = matcher.confidences(pairs)
    _check_confidences(confs, pairs, queries.work_id)

    n_q = len(queries.queries)
    records = []
    for i, cand in enumerate(candidates):
        s_music = aggregate_music(cand.video_id, queries, store, agg=music_agg)
        s_text = max(confs[i * n_q : (i + 1) * n_q])
        records.append(
            ScoreRecord(
                work_id=queries.work_id,
                video_id=cand.video_id,
                s_music=s_music,
                s_text=s_text,
            )
        )
    return records


def score_dataset(
    seed: Dataset,
    candidates: Sequence,
    store: EmbeddingStore,
    matcher: TextMatcher,
    music_agg: str = "mean",
) -> list[ScoreRecord]:
    """Score all candidates, works in sorted order.

    All candidate/query text pairs go through the matcher in a single batch,
    so an external matcher command is spawned once for the whole table
    rather than once per work.
    """
    by_work: dict[str, list] = {}
    for cand in candidates:
        by_work.setdefault(cand.work_id, []).append(cand)
    seed_works = {v.work_id for v in seed.versions}
    missing = sorted(set(by_work) - seed_works)
    if missing:
        raise DataMismatchError(
            f"candidate works missing from the seed dataset: {missing[:10]}"
        )
    pairs: list[MatcherPair] = []
    plan: list[tuple[WorkQuerySet, object, int, int]] = []
    for work_id in sorted(by_work):
        qs = work_query_set(seed, work_id)
        for cand in by_work[work_id]:
            start = len(pairs)
            for q in qs.queries:
                pairs.append((cand.title, cand.channel, q.title, q.performer))
            plan.append((qs, cand, start, len(pairs)))
    confs = matcher.confidences(pairs)
    _check_confidences(confs, pairs, "<all works>")

    out: list[ScoreRecord] = []
    for qs, cand, start, end in plan:
        out.append(
            ScoreRecord(
                work_id=qs.work_id,
                video_id=cand.video_id,
                s_music=aggregate_music(cand.video_id, qs, store, agg=music_agg),
                s_text=max(confs[start:end]),
            )
        )
    return out


# ---------------------------------------------------------------------------
# scores table

SCORES_HEADER = ("work_id", "video_id", "s_music", "s_text")


def write_scores(path: str | Path, records: Sequence[ScoreRecord]) -> None:
    write_tsv(
        path,
        SCORES_HEADER,
        (
            [r.work_id, r.video_id, format_float(r.s_music), format_float(r.s_text)]
            for r in records
        ),
    )


def read_scores(path: str | Path) -> list[ScoreRecord]:
    return [
        ScoreRecord(row[0], row[1], float(row[2]), float(row[3]))
        for row in read_tsv(path, SCORES_HEADER)
    ]
