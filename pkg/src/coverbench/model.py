"""Domain types shared by every pipeline stage.

Covers version records, the four-level ordinal relevance scale, sampling
groups, pair classes, and the uncertainty-class vocabulary shipped in
``vocab.json``.  All types are immutable values and safe to share across
threads.
"""

from __future__ import annotations

import datetime as dt
import enum
import json
from dataclasses import dataclass
from functools import cache
from importlib import resources
from typing import Iterable

from .errors import SchemaError


class Source(enum.Enum):
    """Provenance of a version record."""

    SEED = "seed"
    WEB_CANDIDATE = "web_candidate"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Source":
        return _parse_enum(cls, text)


class RelevanceLabel(enum.IntEnum):
    """Ordinal relevance of a candidate with respect to a query version.

    The numeric ranks define the total order; binary relevance is
    ``label >= VERSION``.
    """

    NO_MUSIC = 0
    NON_VERSION = 1
    VERSION = 2
    MATCH = 3

    @property
    def canonical(self) -> str:
        return self.name.lower()

    def __str__(self) -> str:
        return self.canonical

    @classmethod
    def parse(cls, text: str) -> "RelevanceLabel":
        try:
            return cls[text.upper()]
        except KeyError:
            raise SchemaError(
                f"unknown relevance label {text!r}; expected one of "
                f"{[m.canonical for m in cls]}"
            ) from None


def compare_relevance(a: RelevanceLabel, b: RelevanceLabel) -> int:
    """Total order over relevance labels: -1 if a < b, 0 if equal, 1 if a > b."""
    return (int(a) > int(b)) - (int(a) < int(b))


def is_relevant(label: RelevanceLabel) -> bool:
    """Binary relevance: versions and matches count, the rest do not."""
    return label >= RelevanceLabel.VERSION


class SamplingGroup(enum.Enum):
    """Uncertainty-sampling group a candidate was drawn from."""

    DISAGR_AUDIO = "disagr_audio"
    DISAGR_TEXT = "disagr_text"
    MUTUAL_UNC = "mutual_unc"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "SamplingGroup":
        return _parse_enum(cls, text)


class PairClass(enum.Enum):
    """Relationship category of a (seed, other) pair used in distribution stats."""

    SHS_POSITIVE = "shs_positive"
    YT_MATCH = "yt_match"
    YT_POSITIVE = "yt_positive"
    SHS_NEGATIVE = "shs_negative"
    YT_NEGATIVE = "yt_negative"
    YT_NO_MUSIC = "yt_no_music"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "PairClass":
        return _parse_enum(cls, text)


class Scope(enum.Enum):
    """Whether an uncertainty concerns the song itself or its video context."""

    SONG = "song"
    VIDEO = "video"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Scope":
        return _parse_enum(cls, text)


class TaxonomyCode(enum.Enum):
    """Two-letter alteration codes of the cover-version taxonomy."""

    MULTIPLE_SONGS = "So"
    NON_MUSIC_NOISE = "No"
    CHUNKED = "Ch"
    FIDELITY = "Fi"
    STEM_ISOLATION = "St"
    IN_BACKGROUND = "Ba"
    TIMING = "Tm"
    TEMPO = "Tp"
    TIMBRE = "Tb"
    KEY = "Ke"
    MELODY = "Me"
    HARMONY = "Ha"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "TaxonomyCode":
        return _parse_enum(cls, text)


def _parse_enum(cls, text):
    for member in cls:
        if member.value == text:
            return member
    raise SchemaError(
        f"unknown {cls.__name__} value {text!r}; expected one of "
        f"{[m.value for m in cls]}"
    )


@dataclass(frozen=True)
class UncertaintyClass:
    """One entry of the uncertainty vocabulary.

    ``scope`` is None only for the explicit "none" placeholder, which marks a
    curated but unambiguous candidate (as opposed to an uncurated one).
    """

    name: str
    scope: Scope | None
    code: TaxonomyCode | None

    def __post_init__(self) -> None:
        if not self.name:
            raise SchemaError("uncertainty class name must be non-empty")

    def __str__(self) -> str:
        return self.name


@cache
def _vocab_raw() -> dict:
    text = resources.files("coverbench").joinpath("vocab.json").read_text("utf-8")
    return json.loads(text)


def parse_uncertainty_entries(entries: Iterable[dict]) -> tuple[UncertaintyClass, ...]:
    """Validate raw vocabulary entries; names must be unique."""
    out: list[UncertaintyClass] = []
    seen: set[str] = set()
    for entry in entries:
        name = entry.get("name", "")
        scope = Scope.parse(entry["scope"]) if entry.get("scope") else None
        code = TaxonomyCode.parse(entry["code"]) if entry.get("code") else None
        if name in seen:
            raise SchemaError(f"duplicate uncertainty class name {name!r}")
        seen.add(name)
        out.append(UncertaintyClass(name=name, scope=scope, code=code))
    return tuple(out)


@cache
def uncertainty_classes() -> tuple[UncertaintyClass, ...]:
    """The shipped uncertainty vocabulary, placeholder included."""
    return parse_uncertainty_entries(_vocab_raw()["uncertainty_classes"])


@cache
def _uncertainty_by_name() -> dict[str, UncertaintyClass]:
    return {c.name: c for c in uncertainty_classes()}


def uncertainty_class(name: str) -> UncertaintyClass:
    try:
        return _uncertainty_by_name()[name]
    except KeyError:
        raise SchemaError(
            f"unknown uncertainty class {name!r}; see vocab.json for the "
            "shipped vocabulary"
        ) from None


def load_uncertainty_vocabulary(path) -> tuple[UncertaintyClass, ...]:
    """Load an extended vocabulary file with the same shape as vocab.json."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return parse_uncertainty_entries(raw["uncertainty_classes"])


UNCERTAINTY_NONE = UncertaintyClass(name="none", scope=None, code=None)


@dataclass(frozen=True)
class VersionRecord:
    """One version: a seed entry or a web candidate attached to a work."""

    work_id: str
    version_id: str
    video_id: str
    title: str
    performer: str
    channel: str
    duration_s: int
    upload_date: dt.date | None
    source: Source

    def __post_init__(self) -> None:
        if not self.work_id or not self.version_id or not self.video_id:
            raise SchemaError(
                "work_id, version_id and video_id must all be non-empty "
                f"(got {self.work_id!r}, {self.version_id!r}, {self.video_id!r})"
            )
        if self.duration_s < 0:
            raise SchemaError(
                f"duration_s must be >= 0, got {self.duration_s} for "
                f"video {self.video_id!r}"
            )


def version_sort_key(version_id: str) -> tuple:
    """Ordering key for version identifiers within a work.

    All-digit identifiers sort numerically (so "9" < "10"), everything else
    lexicographically after them.
    """
    if version_id.isdigit():
        return (0, int(version_id), "")
    return (1, 0, version_id)


def parse_date(text: str) -> dt.date | None:
    """Parse an ISO date; empty string means absent."""
    if not text:
        return None
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise SchemaError(f"invalid ISO date {text!r}") from None


def format_date(value: dt.date | None) -> str:
    return value.isoformat() if value is not None else ""
