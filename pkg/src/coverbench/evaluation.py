"""Benchmark assembly, retrieval metrics, and similarity-distribution stats.

Each benchmark member acts as a query in turn; the remaining members are
ranked by model similarity and scored with mean average precision and the
mean rank of the first relevant item.  Pair-class statistics compare the
similarity distributions of seed-to-seed pairs against seed-to-candidate
pairs (within the candidate's work), optionally grouped by uncertainty class
with a Welch two-sample t-test against the seed baseline.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import betainc

from .errors import DataMismatchError, MissingInputError, SchemaError
from .model import (
    PairClass,
    RelevanceLabel,
    Source,
    UncertaintyClass,
    VersionRecord,
    is_relevant,
    version_sort_key,
)
from .store import (
    Dataset,
    EmbeddingStore,
    atomic_write_bytes,
    atomic_write_text,
    format_float,
    read_tsv,
    write_tsv,
)
from .store import VERSIONS_HEADER, version_from_row, version_to_row

SYMMETRY_TOL = 1e-6


# ---------------------------------------------------------------------------
# benchmark assembly


class BenchmarkVariant(enum.Enum):
    YT2Q = "yt2q"
    YT_ALL_Q = "yt_all_q"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, text: str) -> "BenchmarkVariant":
        for member in cls:
            if member.value == text:
                return member
        raise SchemaError(f"unknown benchmark variant {text!r}")


@dataclass
class BenchmarkSet:
    """Benchmark members with their relevance labels."""

    variant: BenchmarkVariant
    members: list[VersionRecord]
    relevance: dict[tuple[str, str], RelevanceLabel]
    exclusions_applied: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def label_of(self, member: VersionRecord) -> RelevanceLabel | None:
        return self.relevance.get((member.work_id, member.video_id))


def assemble_benchmark(
    shs_yt: Dataset,
    seed: Dataset,
    variant: BenchmarkVariant,
    exclusions: frozenset[str] | set[str] = frozenset(),
    queries: Mapping[str, str] | None = None,
) -> BenchmarkSet:
    """Build a benchmark member set from annotated candidates plus seed versions.

    * yt2q adds, per work, the annotation query version and the seed version
      with the lowest version identifier (once, when they coincide);
    * yt_all_q adds every seed version of the annotated works;
    * custom adds nothing beyond the annotated candidates.

    ``exclusions`` is a set of video ids to drop (e.g. versions present in a
    model's training data).  ``queries`` maps work_id to the annotation query
    version_id and is required for yt2q.
    """
    exclusions = frozenset(exclusions)
    seed_by_work = seed.versions_by_work()
    label_map = shs_yt.label_map()

    yt_works = sorted({v.work_id for v in shs_yt.versions})
    missing_works = [w for w in yt_works if w not in seed_by_work]
    if missing_works:
        raise DataMismatchError(
            f"annotated works missing from the seed dataset: {missing_works[:10]}"
        )

    members: dict[tuple[str, str], VersionRecord] = {}
    relevance: dict[tuple[str, str], RelevanceLabel] = {}
    excluded: list[str] = []
    warnings: list[str] = []

    for v in shs_yt.versions:
        if v.video_id in exclusions:
            excluded.append(v.video_id)
            continue
        label_row = label_map.get((v.work_id, v.video_id))
        label = label_row.relevance if label_row is not None else None
        if label is None:
            warnings.append(
                f"candidate {v.video_id} of work {v.work_id} has no decided "
                "label; dropped from the benchmark"
            )
            continue
        members[(v.work_id, v.version_id)] = v
        relevance[(v.work_id, v.video_id)] = label

    def add_seed(version: VersionRecord) -> None:
        # a crawl can surface the seed video itself; the annotated candidate
        # row then already represents this video for the work and its expert
        # label stands
        if (version.work_id, version.video_id) in relevance:
            return
        members.setdefault((version.work_id, version.version_id), version)
        relevance[(version.work_id, version.video_id)] = RelevanceLabel.VERSION

    if variant is BenchmarkVariant.YT2Q:
        if queries is None:
            raise DataMismatchError(
                "yt2q assembly requires the per-work annotation query versions"
            )
        for work_id in yt_works:
            eligible = [
                v for v in seed_by_work[work_id] if v.video_id not in exclusions
            ]
            excluded.extend(
                v.video_id for v in seed_by_work[work_id] if v.video_id in exclusions
            )
            if not eligible:
                raise DataMismatchError(
                    f"work {work_id!r}: all seed versions are excluded"
                )
            query_version_id = queries.get(work_id)
            if query_version_id is None:
                raise DataMismatchError(
                    f"work {work_id!r}: no annotation query version supplied"
                )
            query = next(
                (v for v in eligible if v.version_id == query_version_id), None
            )
            if query is None:
                raise DataMismatchError(
                    f"work {work_id!r}: query version {query_version_id!r} is "
                    "missing or excluded"
                )
            lowest = min(eligible, key=lambda v: version_sort_key(v.version_id))
            add_seed(query)
            if lowest.version_id != query.version_id:
                add_seed(lowest)
    elif variant is BenchmarkVariant.YT_ALL_Q:
        for work_id in yt_works:
            eligible = [
                v for v in seed_by_work[work_id] if v.video_id not in exclusions
            ]
            excluded.extend(
                v.video_id for v in seed_by_work[work_id] if v.video_id in exclusions
            )
            if not eligible:
                raise DataMismatchError(
                    f"work {work_id!r}: all seed versions are excluded"
                )
            for v in eligible:
                add_seed(v)

    member_list = sorted(
        members.values(), key=lambda v: (v.work_id, version_sort_key(v.version_id))
    )

    by_work_relevant: dict[str, int] = {}
    for m in member_list:
        label = relevance.get((m.work_id, m.video_id))
        if label is not None and is_relevant(label):
            by_work_relevant[m.work_id] = by_work_relevant.get(m.work_id, 0) + 1
    for work_id in sorted({m.work_id for m in member_list}):
        if by_work_relevant.get(work_id, 0) < 2:
            warnings.append(
                f"work {work_id}: fewer than 2 relevant members; some queries "
                "will be excluded from MAP/MR1"
            )

    return BenchmarkSet(
        variant=variant,
        members=member_list,
        relevance=relevance,
        exclusions_applied=sorted(set(excluded)),
        warnings=warnings,
    )


BENCHMARK_HEADER = VERSIONS_HEADER + ("relevance",)


def write_benchmark(path: str | Path, benchmark: BenchmarkSet) -> None:
    rows = []
    for m in benchmark.members:
        label = benchmark.label_of(m)
        rows.append(version_to_row(m) + [label.canonical if label is not None else ""])
    write_tsv(path, BENCHMARK_HEADER, rows)


def read_benchmark(path: str | Path) -> BenchmarkSet:
    members: list[VersionRecord] = []
    relevance: dict[tuple[str, str], RelevanceLabel] = {}
    for row in read_tsv(path, BENCHMARK_HEADER):
        record = version_from_row(row[:-1])
        members.append(record)
        if row[-1]:
            relevance[(record.work_id, record.video_id)] = RelevanceLabel.parse(row[-1])
    return BenchmarkSet(
        variant=BenchmarkVariant.CUSTOM, members=members, relevance=relevance
    )


# ---------------------------------------------------------------------------
# similarity matrices


@dataclass
class SimilarityMatrix:
    """Square model-similarity matrix keyed by video id."""

    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        n = len(self.ids)
        if len(set(self.ids)) != n:
            raise SchemaError("similarity matrix ids must be unique")
        if self.values.shape != (n, n):
            raise SchemaError(
                f"similarity matrix shape {self.values.shape} does not match "
                f"{n} ids"
            )
        if not np.isfinite(self.values).all():
            raise SchemaError("similarity matrix contains non-finite values")
        if n and float(np.abs(self.values - self.values.T).max()) > SYMMETRY_TOL:
            raise SchemaError(
                f"similarity matrix asymmetry exceeds tolerance {SYMMETRY_TOL}"
            )
        self._row_of = {vid: i for i, vid in enumerate(self.ids)}

    def row_of(self, video_id: str) -> int:
        try:
            return self._row_of[video_id]
        except KeyError:
            raise DataMismatchError(
                f"video id {video_id!r} not present in the similarity matrix"
            ) from None


def save_similarities(
    matrix: SimilarityMatrix, matrix_path: str | Path, index_path: str | Path
) -> None:
    data = np.ascontiguousarray(matrix.values, dtype="<f4").tobytes()
    atomic_write_bytes(matrix_path, data)
    atomic_write_text(index_path, "\n".join(matrix.ids) + "\n")


def load_similarities(
    matrix_path: str | Path, index_path: str | Path
) -> SimilarityMatrix:
    matrix_path, index_path = Path(matrix_path), Path(index_path)
    for p in (matrix_path, index_path):
        if not p.exists():
            raise MissingInputError(f"no such file: {p}")
    ids = [l for l in index_path.read_text(encoding="utf-8").splitlines() if l]
    raw = matrix_path.read_bytes()
    n = len(ids)
    if n == 0:
        raise SchemaError(f"{index_path}: empty similarity index")
    if len(raw) != 4 * n * n:
        raise SchemaError(
            f"{matrix_path}: expected {4 * n * n} bytes for a {n}x{n} matrix, "
            f"got {len(raw)}"
        )
    values = np.frombuffer(raw, dtype="<f4").reshape(n, n).astype(np.float64)
    return SimilarityMatrix(ids=tuple(ids), values=values)


def sims_from_embeddings(
    store: EmbeddingStore, ids: Sequence[str] | None = None
) -> SimilarityMatrix:
    """Cosine-of-embeddings similarity matrix for the given ids (store order
    by default)."""
    id_list = list(ids) if ids is not None else store.ids
    rows = np.stack([store.vector(vid) for vid in id_list]).astype(np.float64)
    norms = np.linalg.norm(rows, axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise DataMismatchError(
            f"zero-norm embedding for video id {id_list[int(zero[0])]!r}"
        )
    unit = rows / norms[:, None]
    values = np.clip(unit @ unit.T, -1.0, 1.0)
    values = (values + values.T) / 2.0
    return SimilarityMatrix(ids=tuple(id_list), values=values)


# ---------------------------------------------------------------------------
# ranking metrics


def rank_for_query(query_index: int, matrix: SimilarityMatrix) -> list[int]:
    """Member indices ranked by descending similarity to the query.

    The query itself is excluded; ties break by ascending member id.
    """
    n = len(matrix.ids)
    if not 0 <= query_index < n:
        raise DataMismatchError(f"query index {query_index} out of range 0..{n - 1}")
    sims = matrix.values[query_index]
    others = [j for j in range(n) if j != query_index]
    others.sort(key=lambda j: (-sims[j], matrix.ids[j]))
    return others


def average_precision(flags: Sequence[bool]) -> float:
    """Mean of precision-at-k over the relevant positions of one ranking."""
    hits = 0
    total = 0.0
    for k, flag in enumerate(flags, start=1):
        if flag:
            hits += 1
            total += hits / k
    if hits == 0:
        raise DataMismatchError("average_precision requires at least one relevant item")
    return total / hits


def first_relevant_rank(flags: Sequence[bool]) -> int:
    for k, flag in enumerate(flags, start=1):
        if flag:
            return k
    raise DataMismatchError("ranking has no relevant item")


def mean_rank_first_relevant(rankings: Sequence[Sequence[bool]]) -> float:
    if not rankings:
        raise DataMismatchError("mean_rank_first_relevant requires >= 1 ranking")
    return float(np.mean([first_relevant_rank(flags) for flags in rankings]))


@dataclass(frozen=True)
class RetrievalResult:
    map: float
    mr1: float
    n_queries: int
    n_excluded: int
    excluded_ids: tuple[str, ...] = ()


def evaluate(benchmark: BenchmarkSet, matrix: SimilarityMatrix) -> RetrievalResult:
    """MAP and MR1 over every member-as-query with >= 1 relevant counterpart.

    Relevance of another member is binary: same work and a relevant label.
    Queries without any relevant counterpart are excluded and counted.
    """
    member_vids = {m.video_id for m in benchmark.members}
    matrix_vids = set(matrix.ids)
    if member_vids != matrix_vids:
        missing = sorted(member_vids - matrix_vids)
        extra = sorted(matrix_vids - member_vids)
        raise DataMismatchError(
            f"similarity matrix ids do not match benchmark members "
            f"(missing: {missing[:5]}, extra: {extra[:5]})"
        )

    members = benchmark.members
    n = len(members)
    rows = np.array([matrix.row_of(m.video_id) for m in members])
    relevant_mask = np.array(
        [
            (lambda lab: lab is not None and is_relevant(lab))(benchmark.label_of(m))
            for m in members
        ]
    )
    work_codes_map: dict[str, int] = {}
    work_codes = np.array(
        [work_codes_map.setdefault(m.work_id, len(work_codes_map)) for m in members]
    )
    # dense rank by (video_id, index): sorting by it reproduces the
    # documented (-similarity, video_id, position) tie order in one lexsort
    id_rank = np.empty(n, dtype=np.int64)
    id_rank[
        np.argsort(np.array([m.video_id for m in members]), kind="stable")
    ] = np.arange(n)

    ap_values: list[float] = []
    fr_ranks: list[int] = []
    excluded: list[str] = []
    positions_cache = np.arange(1, n + 1, dtype=np.float64)
    for qi in range(n):
        q_row = rows[qi]
        keep = rows != q_row  # drops the query and self-similarity rows
        flags_all = keep & (work_codes == work_codes[qi]) & relevant_mask
        if not flags_all.any():
            excluded.append(members[qi].video_id)
            continue
        sims = matrix.values[q_row][rows[keep]]
        order = np.lexsort((id_rank[keep], -sims))
        flags = flags_all[keep][order]
        hits = np.cumsum(flags)
        relevant_at = np.nonzero(flags)[0]
        ap_values.append(
            float(np.mean(hits[relevant_at] / positions_cache[relevant_at]))
        )
        fr_ranks.append(int(relevant_at[0]) + 1)

    if not ap_values:
        raise DataMismatchError("no query has a relevant counterpart")
    return RetrievalResult(
        map=float(np.mean(ap_values)),
        mr1=float(np.mean(fr_ranks)),
        n_queries=len(ap_values),
        n_excluded=len(excluded),
        excluded_ids=tuple(excluded),
    )


# ---------------------------------------------------------------------------
# pair classification and distribution statistics


def classify_pair(
    a: VersionRecord,
    b: VersionRecord,
    b_label: RelevanceLabel | None,
) -> PairClass | None:
    """Pair class of (seed baseline a, other member b); None if not applicable.

    Seed-to-seed pairs split by work identity; candidate pairs split by the
    candidate's label, with version/match additionally requiring the same
    work.
    """
    if a.source is not Source.SEED:
        raise DataMismatchError(
            f"baseline side of a pair must be a seed version, got {a.video_id!r}"
        )
    if b.source is Source.SEED:
        return (
            PairClass.SHS_POSITIVE if a.work_id == b.work_id else PairClass.SHS_NEGATIVE
        )
    if b_label is None:
        return None
    if b_label is RelevanceLabel.NO_MUSIC:
        return PairClass.YT_NO_MUSIC
    if b_label is RelevanceLabel.NON_VERSION:
        return PairClass.YT_NEGATIVE
    if a.work_id != b.work_id:
        return None
    return PairClass.YT_MATCH if b_label is RelevanceLabel.MATCH else PairClass.YT_POSITIVE


@dataclass(frozen=True)
class ClassStats:
    mean: float | None
    std: float | None
    support: int


def _stats_of(values: list[float]) -> ClassStats:
    n = len(values)
    if n == 0:
        return ClassStats(mean=None, std=None, support=0)
    if n == 1:
        return ClassStats(mean=float(values[0]), std=None, support=1)
    arr = np.asarray(values, dtype=np.float64)
    return ClassStats(
        mean=float(arr.mean()), std=float(arr.std(ddof=1)), support=n
    )


def _collect_pair_sims(
    matrix: SimilarityMatrix,
    members: Sequence[VersionRecord],
    labels: Mapping[tuple[str, str], RelevanceLabel],
) -> dict[PairClass, list[float]]:
    """Similarities per pair class, each unordered pair counted once.

    Seed-seed pairs are enumerated across all works; seed-candidate pairs
    only within the candidate's work, the retrieval context it was surfaced
    and annotated in.
    """
    seeds = [m for m in members if m.source is Source.SEED]
    webs = [m for m in members if m.source is not Source.SEED]
    sims: dict[PairClass, list[float]] = {cls: [] for cls in PairClass}

    seed_rows = np.array([matrix.row_of(m.video_id) for m in seeds], dtype=np.int64)
    if len(seeds) >= 2:
        work_codes: dict[str, int] = {}
        codes = np.array(
            [work_codes.setdefault(m.work_id, len(work_codes)) for m in seeds]
        )
        block = matrix.values[np.ix_(seed_rows, seed_rows)]
        iu = np.triu_indices(len(seeds), k=1)
        same = codes[iu[0]] == codes[iu[1]]
        values = block[iu]
        sims[PairClass.SHS_POSITIVE] = [float(v) for v in values[same]]
        sims[PairClass.SHS_NEGATIVE] = [float(v) for v in values[~same]]

    seeds_by_work: dict[str, list[VersionRecord]] = {}
    for m in seeds:
        seeds_by_work.setdefault(m.work_id, []).append(m)
    for b in webs:
        label = labels.get((b.work_id, b.video_id))
        b_row = matrix.row_of(b.video_id)
        for a in seeds_by_work.get(b.work_id, []):
            cls = classify_pair(a, b, label)
            if cls is None:
                continue
            a_row = matrix.row_of(a.video_id)
            if a_row == b_row:
                continue
            sims[cls].append(float(matrix.values[a_row, b_row]))
    return sims


def pair_class_stats(
    matrix: SimilarityMatrix,
    members: Sequence[VersionRecord],
    labels: Mapping[tuple[str, str], RelevanceLabel],
) -> dict[PairClass, ClassStats]:
    """Mean, sample standard deviation and support per pair class."""
    sims = _collect_pair_sims(matrix, members, labels)
    return {cls: _stats_of(values) for cls, values in sims.items()}


def welch_t_test(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Welch's unequal-variance t statistic and two-sided p value.

    The p value evaluates the Student-t distribution function through the
    regularized incomplete beta function.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.size < 2 or ya.size < 2:
        raise DataMismatchError(
            f"welch_t_test requires both samples to have >= 2 values "
            f"(got {xa.size} and {ya.size})"
        )
    vx = float(xa.var(ddof=1))
    vy = float(ya.var(ddof=1))
    nx, ny = xa.size, ya.size
    se2 = vx / nx + vy / ny
    if se2 == 0.0:
        raise DataMismatchError("welch_t_test is undefined for zero combined variance")
    t = (float(xa.mean()) - float(ya.mean())) / math.sqrt(se2)
    dof = se2**2 / ((vx / nx) ** 2 / (nx - 1) + (vy / ny) ** 2 / (ny - 1))
    p = float(betainc(dof / 2.0, 0.5, dof / (dof + t * t)))
    return t, p


@dataclass(frozen=True)
class GroupStats:
    """Per-uncertainty-class similarity stats against a seed baseline."""

    baseline: PairClass
    uncertainty: str
    mean: float | None
    std: float | None
    support: int
    p: float | None
    significant: bool | None
    flag: str = ""


_GROUPED = (
    (PairClass.YT_POSITIVE, PairClass.SHS_POSITIVE),
    (PairClass.YT_NEGATIVE, PairClass.SHS_NEGATIVE),
)


def grouped_uncertainty_stats(
    matrix: SimilarityMatrix,
    members: Sequence[VersionRecord],
    labels: Mapping[tuple[str, str], RelevanceLabel],
    uncertainty: Mapping[tuple[str, str], UncertaintyClass],
    alpha_sig: float = 0.01,
) -> list[GroupStats]:
    """Similarity stats per (seed baseline, uncertainty class) group.

    Candidate pairs (within the candidate's work) group by the candidate's
    uncertainty class; each group's similarities are tested against the seed
    baseline class with a Welch t-test at ``alpha_sig``.
    """
    base_sims = _collect_pair_sims(matrix, members, labels)
    seeds_by_work: dict[str, list[VersionRecord]] = {}
    for m in members:
        if m.source is Source.SEED:
            seeds_by_work.setdefault(m.work_id, []).append(m)

    grouped: dict[tuple[PairClass, str], list[float]] = {}
    for b in members:
        if b.source is Source.SEED:
            continue
        unc = uncertainty.get((b.work_id, b.video_id))
        if unc is None:
            continue
        label = labels.get((b.work_id, b.video_id))
        b_row = matrix.row_of(b.video_id)
        for a in seeds_by_work.get(b.work_id, []):
            cls = classify_pair(a, b, label)
            if cls not in (PairClass.YT_POSITIVE, PairClass.YT_NEGATIVE):
                continue
            a_row = matrix.row_of(a.video_id)
            if a_row == b_row:
                continue
            grouped.setdefault((cls, unc.name), []).append(
                float(matrix.values[a_row, b_row])
            )

    out: list[GroupStats] = []
    for pair_cls, baseline_cls in _GROUPED:
        baseline_values = base_sims[baseline_cls]
        names = sorted(name for cls, name in grouped if cls is pair_cls)
        for name in names:
            values = grouped[(pair_cls, name)]
            stats = _stats_of(values)
            if stats.support < 2:
                out.append(
                    GroupStats(
                        baseline=baseline_cls,
                        uncertainty=name,
                        mean=None,
                        std=None,
                        support=stats.support,
                        p=None,
                        significant=None,
                        flag="insufficient_support",
                    )
                )
                continue
            if len(baseline_values) < 2:
                p, significant, flag = None, None, "insufficient_baseline"
            else:
                try:
                    _, p = welch_t_test(values, baseline_values)
                    significant = p < alpha_sig
                    flag = ""
                except DataMismatchError:
                    p, significant, flag = None, None, "degenerate_variance"
            out.append(
                GroupStats(
                    baseline=baseline_cls,
                    uncertainty=name,
                    mean=stats.mean,
                    std=stats.std,
                    support=stats.support,
                    p=p,
                    significant=significant,
                    flag=flag,
                )
            )
    return out


# ---------------------------------------------------------------------------
# report


@dataclass
class ModelEval:
    retrieval: RetrievalResult
    pair_stats: dict[PairClass, ClassStats]
    group_stats: list[GroupStats]


@dataclass
class EvalReport:
    models: dict[str, ModelEval]
    benchmark_size: int
    alpha_sig: float = 0.01

    def to_json_dict(self) -> dict:
        def round_or_none(x):
            return None if x is None else float(x)

        models = {}
        for name, ev in sorted(self.models.items()):
            models[name] = {
                "map": ev.retrieval.map,
                "mr1": ev.retrieval.mr1,
                "n_queries": ev.retrieval.n_queries,
                "n_excluded_queries": ev.retrieval.n_excluded,
                "pair_classes": {
                    cls.value: {
                        "mean": round_or_none(st.mean),
                        "std": round_or_none(st.std),
                        "support": st.support,
                    }
                    for cls, st in sorted(
                        ev.pair_stats.items(), key=lambda kv: kv[0].value
                    )
                },
                "uncertainty_groups": [
                    {
                        "baseline": g.baseline.value,
                        "uncertainty": g.uncertainty,
                        "mean": round_or_none(g.mean),
                        "std": round_or_none(g.std),
                        "support": g.support,
                        "p": round_or_none(g.p),
                        "significant": g.significant,
                        "flag": g.flag,
                    }
                    for g in ev.group_stats
                ],
            }
        return {
            "benchmark_size": self.benchmark_size,
            "significance_alpha": self.alpha_sig,
            "models": models,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"


def _fmt(value: float | None, digits: int = 2) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def render_markdown(report: EvalReport) -> str:
    """Human-readable tables: retrieval metrics, pair classes, uncertainty groups."""
    names = sorted(report.models)
    lines: list[str] = []
    lines.append("# Benchmark report")
    lines.append("")
    lines.append(f"Members: {report.benchmark_size}")
    lines.append("")
    lines.append("## Retrieval metrics")
    lines.append("")
    lines.append("| Model | MAP | MR1 | Queries | Excluded |")
    lines.append("|---|---|---|---|---|")
    for name in names:
        r = report.models[name].retrieval
        lines.append(
            f"| {name} | {r.map:.4f} | {r.mr1:.2f} | {r.n_queries} | {r.n_excluded} |"
        )
    lines.append("")
    lines.append("## Pair-class similarity distributions")
    lines.append("")
    lines.append("| Pair class | " + " | ".join(names) + " | Support |")
    lines.append("|---" * (len(names) + 2) + "|")
    for cls in PairClass:
        cells = []
        support = 0
        for name in names:
            st = report.models[name].pair_stats[cls]
            support = st.support
            cells.append(
                "-" if st.mean is None else f"{_fmt(st.mean)} ± {_fmt(st.std)}"
            )
        lines.append(f"| {cls.value} | " + " | ".join(cells) + f" | {support} |")
    lines.append("")
    lines.append(
        f"## Similarity by uncertainty class (significance: p < {report.alpha_sig})"
    )
    lines.append("")
    lines.append("| Baseline | Uncertainty class | " + " | ".join(names) + " | Support |")
    lines.append("|---" * (len(names) + 3) + "|")
    group_keys: list[tuple[str, str]] = []
    for name in names:
        for g in report.models[name].group_stats:
            key = (g.baseline.value, g.uncertainty)
            if key not in group_keys:
                group_keys.append(key)
    for baseline, unc in group_keys:
        cells = []
        support = 0
        for name in names:
            match = next(
                (
                    g
                    for g in report.models[name].group_stats
                    if g.baseline.value == baseline and g.uncertainty == unc
                ),
                None,
            )
            if match is None or match.mean is None:
                cells.append("-")
                if match is not None:
                    support = match.support
            else:
                star = "*" if match.significant else ""
                cells.append(f"{star}{_fmt(match.mean)} ± {_fmt(match.std)}")
                support = match.support
        lines.append(
            f"| {baseline} | {unc} | " + " | ".join(cells) + f" | {support} |"
        )
    lines.append("")
    return "\n".join(lines)
