"""Crawl ingestion, query formulation, and the on-disk artifact formats.

File conventions:

* tabular artifacts are UTF-8 tab-separated files with a header row; tab,
  newline, carriage return and backslash inside fields are escaped as
  ``\\t``, ``\\n``, ``\\r`` and ``\\\\``;
* embeddings are flat little-endian float32 binaries, row-major, with a
  sidecar text index (one video id per line, line number = row);
* crawl metadata is line-delimited JSON.

Writers go through :func:`atomic_write_text` (temp file + rename) and an
advisory lock file, so a reader never observes a half-written artifact.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    LockError,
    MissingEmbeddingError,
    MissingInputError,
    SchemaError,
)
from .model import (
    RelevanceLabel,
    SamplingGroup,
    Source,
    UncertaintyClass,
    VersionRecord,
    format_date,
    parse_date,
    uncertainty_class,
)

# ---------------------------------------------------------------------------
# low-level helpers


def escape_field(value: str) -> str:
    return (
        value.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def unescape_field(value: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            mapped = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt)
            if mapped is not None:
                out.append(mapped)
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename.

    Newlines are written verbatim so output bytes do not depend on the
    platform's line-ending convention.
    """
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


@contextmanager
def path_lock(path: str | Path) -> Iterator[None]:
    """Advisory lock file guarding writers of ``path``."""
    lock = Path(str(path) + ".lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError(f"lock already held for {path} (stale file: {lock})") from None
    try:
        os.close(fd)
        yield
    finally:
        try:
            os.unlink(lock)
        except FileNotFoundError:
            pass


def format_float(value: float) -> str:
    """Shortest round-trip decimal form; deterministic across runs."""
    return repr(float(value))


def write_tsv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise SchemaError(
                f"row width {len(row)} does not match header width {len(header)}"
            )
        lines.append("\t".join(escape_field(cell) for cell in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_tsv(path: str | Path, expected_header: Sequence[str]) -> list[list[str]]:
    """Read a TSV table, enforcing the exact expected column set."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"no such file: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    # split strictly on the newline the writer emits; str.splitlines would
    # also split on exotic separators (NEL, U+2028) that may appear inside
    # escaped fields
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SchemaError(f"{path}: empty file, expected header row")
    header = lines[0].split("\t")
    if list(header) != list(expected_header):
        missing = [c for c in expected_header if c not in header]
        unknown = [c for c in header if c not in expected_header]
        raise SchemaError(
            f"{path}: header mismatch; missing columns {missing}, "
            f"unknown columns {unknown}"
        )
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if line == "":
            continue
        cells = [unescape_field(c) for c in line.split("\t")]
        if len(cells) != len(header):
            raise SchemaError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(cells)}"
            )
        rows.append(cells)
    return rows


# ---------------------------------------------------------------------------
# crawl ingestion


@dataclass(frozen=True)
class CrawlRecord:
    """One crawled video result for one originating text query."""

    video_id: str
    title: str
    channel: str
    duration_s: int
    originating_query: str
    upload_date: object | None = None  # datetime.date

    def to_json(self) -> str:
        payload = {
            "video_id": self.video_id,
            "title": self.title,
            "channel": self.channel,
            "duration_s": self.duration_s,
            "originating_query": self.originating_query,
            "upload_date": format_date(self.upload_date) or None,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False)


_CRAWL_REQUIRED = ("video_id", "title", "channel", "duration_s", "originating_query")


def parse_crawl(lines: Iterable[str], duration_cap_s: int = 600) -> list[CrawlRecord]:
    """Parse line-delimited crawl records, filter and deduplicate.

    Records at or above ``duration_cap_s`` seconds are dropped (a 600 s video
    is dropped under the default cap).  Duplicate video ids collapse to the
    first retained occurrence.  Malformed lines are collected and raised as a
    single :class:`SchemaError` naming each offending line.
    """
    problems: list[str] = []
    parsed: list[CrawlRecord] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
            continue
        if not isinstance(obj, dict):
            problems.append(f"line {lineno}: expected a JSON object")
            continue
        missing = [k for k in _CRAWL_REQUIRED if k not in obj or obj[k] is None]
        if missing:
            problems.append(
                f"line {lineno}: missing required field(s) {', '.join(missing)}"
            )
            continue
        try:
            duration = int(obj["duration_s"])
        except (TypeError, ValueError):
            problems.append(
                f"line {lineno}: field duration_s must be an integer, "
                f"got {obj['duration_s']!r}"
            )
            continue
        video_id = str(obj["video_id"])
        if not video_id:
            problems.append(f"line {lineno}: field video_id must be non-empty")
            continue
        if duration < 0:
            problems.append(
                f"line {lineno}: field duration_s must be >= 0, got {duration}"
            )
            continue
        try:
            upload = parse_date(str(obj.get("upload_date") or ""))
        except SchemaError as exc:
            problems.append(f"line {lineno}: {exc}")
            continue
        parsed.append(
            CrawlRecord(
                video_id=video_id,
                title=str(obj["title"]),
                channel=str(obj["channel"]),
                duration_s=duration,
                originating_query=str(obj["originating_query"]),
                upload_date=upload,
            )
        )
    if problems:
        raise SchemaError("crawl parse failed:\n  " + "\n  ".join(problems))

    kept: list[CrawlRecord] = []
    seen: set[str] = set()
    for rec in parsed:
        if rec.duration_s >= duration_cap_s:
            continue
        if rec.video_id in seen:
            continue
        seen.add(rec.video_id)
        kept.append(rec)
    return kept


def load_crawl(path: str | Path, duration_cap_s: int = 600) -> list[CrawlRecord]:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_crawl(fh, duration_cap_s=duration_cap_s)


def dump_crawl(records: Iterable[CrawlRecord]) -> str:
    return "".join(rec.to_json() + "\n" for rec in records)


# ---------------------------------------------------------------------------
# query formulation


@dataclass(frozen=True)
class QueryTemplateSet:
    """Ordered query templates over ``{performer}`` and ``{title}`` tokens."""

    templates: tuple[str, ...]

    def expand(
        self, performer: str, title: str, suggestions: Sequence[str] = ()
    ) -> list[str]:
        performer = " ".join(performer.split())
        title = " ".join(title.split())
        if not performer or not title:
            raise SchemaError(
                "performer and title must both be non-empty after trimming"
            )
        queries: list[str] = []
        seen: set[str] = set()
        for template in self.templates:
            q = template.format(performer=performer, title=title)
            if q not in seen:
                seen.add(q)
                queries.append(q)
        for s in suggestions:
            if s not in seen:
                seen.add(s)
                queries.append(s)
        return queries


DEFAULT_QUERY_TEMPLATES = QueryTemplateSet(
    templates=(
        "{performer} {title}",
        "{title} {performer}",
        "{performer} {title} cover",
    )
)


def formulate_queries(
    performer: str, title: str, suggestions: Sequence[str] = ()
) -> list[str]:
    """Deterministic, deduplicated search queries for one work.

    The base template ``"<performer> <title>"`` is always first; suggestions
    are appended verbatim in input order.
    """
    return DEFAULT_QUERY_TEMPLATES.expand(performer, title, suggestions)


QUERIES_HEADER = ("work_id", "query")


def write_queries(path: str | Path, rows: Iterable[tuple[str, str]]) -> None:
    write_tsv(path, QUERIES_HEADER, [list(r) for r in rows])


def read_queries(path: str | Path) -> list[tuple[str, str]]:
    return [(r[0], r[1]) for r in read_tsv(path, QUERIES_HEADER)]


# ---------------------------------------------------------------------------
# embedding store


@dataclass
class EmbeddingStore:
    """In-memory embedding matrix with a video-id -> row index."""

    dim: int
    rows: np.ndarray
    index: dict[str, int]

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise SchemaError(f"embedding dim must be positive, got {self.dim}")
        self.rows = np.asarray(self.rows, dtype=np.float32)
        if self.rows.ndim != 2 or self.rows.shape[1] != self.dim:
            raise SchemaError(
                f"embedding matrix shape {self.rows.shape} does not match dim {self.dim}"
            )
        n = self.rows.shape[0]
        if len(self.index) != n or sorted(self.index.values()) != list(range(n)):
            raise SchemaError(
                "embedding index must map ids one-to-one onto matrix rows "
                f"(ids: {len(self.index)}, rows: {n})"
            )

    def __contains__(self, video_id: str) -> bool:
        return video_id in self.index

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def ids(self) -> list[str]:
        """Video ids in row order."""
        return [vid for vid, _ in sorted(self.index.items(), key=lambda kv: kv[1])]

    def vector(self, video_id: str) -> np.ndarray:
        try:
            return self.rows[self.index[video_id]]
        except KeyError:
            raise MissingEmbeddingError(
                f"no embedding for video_id {video_id!r}"
            ) from None


def save_embeddings(
    store: EmbeddingStore, matrix_path: str | Path, index_path: str | Path
) -> None:
    data = np.ascontiguousarray(store.rows, dtype="<f4").tobytes()
    atomic_write_bytes(matrix_path, data)
    atomic_write_text(index_path, "\n".join(store.ids) + "\n")


def load_embeddings(
    matrix_path: str | Path, index_path: str | Path, dim: int | None = None
) -> EmbeddingStore:
    """Load a binary embedding matrix plus sidecar index.

    The dimension is inferred from byte length and row count unless given
    explicitly.  Non-finite values are rejected, naming the offending video.
    """
    matrix_path, index_path = Path(matrix_path), Path(index_path)
    for p in (matrix_path, index_path):
        if not p.exists():
            raise MissingInputError(f"no such file: {p}")
    ids = index_path.read_text(encoding="utf-8").splitlines()
    ids = [i for i in ids if i != ""]
    if not ids:
        raise SchemaError(f"{index_path}: empty embedding index")
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise SchemaError(f"{index_path}: duplicate video ids {dupes[:5]}")
    raw = matrix_path.read_bytes()
    n = len(ids)
    if len(raw) % 4 != 0:
        raise SchemaError(f"{matrix_path}: byte length {len(raw)} not a multiple of 4")
    n_floats = len(raw) // 4
    if dim is None:
        if n_floats % n != 0:
            raise SchemaError(
                f"{matrix_path}: {n_floats} values cannot be split into {n} rows "
                f"(index {index_path} may reference rows beyond the matrix)"
            )
        dim = n_floats // n
    elif n_floats != n * dim:
        raise SchemaError(
            f"{matrix_path}: expected {n * dim} values for {n} rows of dim {dim}, "
            f"got {n_floats}"
        )
    rows = np.frombuffer(raw, dtype="<f4").reshape(n, dim).copy()
    bad = ~np.isfinite(rows)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise SchemaError(
            f"{matrix_path}: non-finite value in row for video_id {ids[row]!r}"
        )
    return EmbeddingStore(dim=dim, rows=rows, index={vid: i for i, vid in enumerate(ids)})


# ---------------------------------------------------------------------------
# dataset tables


@dataclass(frozen=True)
class LabelRecord:
    """Final annotation state of one (work, candidate) pair."""

    work_id: str
    video_id: str
    relevance: RelevanceLabel | None
    uncertainty: UncertaintyClass | None = None
    group: SamplingGroup | None = None
    flag: str = ""

    _FLAGS = ("", "worker_error", "incomplete")

    def __post_init__(self) -> None:
        if self.flag not in self._FLAGS:
            raise SchemaError(
                f"unknown label flag {self.flag!r}; expected one of {self._FLAGS}"
            )


@dataclass
class Dataset:
    """Version records plus their annotation state."""

    versions: list[VersionRecord] = field(default_factory=list)
    labels: list[LabelRecord] = field(default_factory=list)

    def validate(self) -> None:
        seen: set[tuple[str, str]] = set()
        for v in self.versions:
            key = (v.work_id, v.version_id)
            if key in seen:
                raise SchemaError(f"duplicate (work_id, version_id) pair {key}")
            seen.add(key)
        label_keys: set[tuple[str, str]] = set()
        for l in self.labels:
            key = (l.work_id, l.video_id)
            if key in label_keys:
                raise SchemaError(f"duplicate label row for {key}")
            label_keys.add(key)

    def versions_by_work(self) -> dict[str, list[VersionRecord]]:
        out: dict[str, list[VersionRecord]] = {}
        for v in self.versions:
            out.setdefault(v.work_id, []).append(v)
        return out

    def label_map(self) -> dict[tuple[str, str], LabelRecord]:
        return {(l.work_id, l.video_id): l for l in self.labels}


VERSIONS_HEADER = (
    "work_id",
    "version_id",
    "video_id",
    "title",
    "performer",
    "channel",
    "duration_s",
    "upload_date",
    "source",
)

LABELS_HEADER = ("work_id", "video_id", "relevance", "uncertainty", "group", "flag")


def version_to_row(v: VersionRecord) -> list[str]:
    return [
        v.work_id,
        v.version_id,
        v.video_id,
        v.title,
        v.performer,
        v.channel,
        str(v.duration_s),
        format_date(v.upload_date),
        v.source.value,
    ]


def version_from_row(row: Sequence[str]) -> VersionRecord:
    return VersionRecord(
        work_id=row[0],
        version_id=row[1],
        video_id=row[2],
        title=row[3],
        performer=row[4],
        channel=row[5],
        duration_s=int(row[6]),
        upload_date=parse_date(row[7]),
        source=Source.parse(row[8]),
    )


def write_versions(path: str | Path, versions: Iterable[VersionRecord]) -> None:
    write_tsv(path, VERSIONS_HEADER, (version_to_row(v) for v in versions))


def read_versions(path: str | Path) -> list[VersionRecord]:
    return [version_from_row(r) for r in read_tsv(path, VERSIONS_HEADER)]


def label_to_row(l: LabelRecord) -> list[str]:
    return [
        l.work_id,
        l.video_id,
        l.relevance.canonical if l.relevance is not None else "",
        l.uncertainty.name if l.uncertainty is not None else "",
        l.group.value if l.group is not None else "",
        l.flag,
    ]


def label_from_row(row: Sequence[str]) -> LabelRecord:
    return LabelRecord(
        work_id=row[0],
        video_id=row[1],
        relevance=RelevanceLabel.parse(row[2]) if row[2] else None,
        uncertainty=uncertainty_class(row[3]) if row[3] else None,
        group=SamplingGroup.parse(row[4]) if row[4] else None,
        flag=row[5],
    )


def write_labels(path: str | Path, labels: Iterable[LabelRecord]) -> None:
    write_tsv(path, LABELS_HEADER, (label_to_row(l) for l in labels))


def read_labels(path: str | Path) -> list[LabelRecord]:
    return [label_from_row(r) for r in read_tsv(path, LABELS_HEADER)]


def write_dataset(dataset: Dataset, directory: str | Path) -> None:
    """Write versions.tsv and labels.tsv under ``directory`` (locked)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    dataset.validate()
    with path_lock(directory / "versions.tsv"):
        write_versions(directory / "versions.tsv", dataset.versions)
        write_labels(directory / "labels.tsv", dataset.labels)


def read_dataset(directory: str | Path) -> Dataset:
    directory = Path(directory)
    versions = read_versions(directory / "versions.tsv")
    labels_path = directory / "labels.tsv"
    labels = read_labels(labels_path) if labels_path.exists() else []
    ds = Dataset(versions=versions, labels=labels)
    ds.validate()
    return ds
