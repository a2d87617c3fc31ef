"""Uncertainty sampling: disagreement ranking and mutual uncertainty.

Per work, three ranking functions select annotation candidates:

* disagr_audio ranks by ``s_music - s_text`` where the music score is
  strictly higher;
* disagr_text ranks the opposite direction;
* mutual_unc ranks by negative Euclidean distance to the per-work center of
  uncertainty, the per-modality midpoint between the lowest and highest
  score over all candidates.

The top k of each group are taken in that order, excluding candidates that
are already assigned; a disagr_audio deficit is topped up from the mutual
ranking.  Ties always break by ascending video id.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError, DataMismatchError
from .model import SamplingGroup
from .scoring import ScoreRecord
from .store import format_float, read_tsv, write_tsv


class Direction(enum.Enum):
    AUDIO_OVER_TEXT = "audio_over_text"
    TEXT_OVER_AUDIO = "text_over_audio"


@dataclass(frozen=True)
class WorkScoreCloud:
    """All scored candidates of one work."""

    work_id: str
    records: tuple[ScoreRecord, ...]

    def __post_init__(self) -> None:
        if not self.records:
            raise DataMismatchError(f"empty score cloud for work {self.work_id!r}")
        for r in self.records:
            if r.work_id != self.work_id:
                raise DataMismatchError(
                    f"record for work {r.work_id!r} in cloud {self.work_id!r}"
                )
        vids = [r.video_id for r in self.records]
        if len(set(vids)) != len(vids):
            raise DataMismatchError(
                f"duplicate candidate video ids in cloud {self.work_id!r}"
            )

    def bounds(self) -> tuple[float, float, float, float]:
        """(min_music, max_music, min_text, max_text) over all candidates."""
        musics = [r.s_music for r in self.records]
        texts = [r.s_text for r in self.records]
        return min(musics), max(musics), min(texts), max(texts)


def mutual_center(cloud: WorkScoreCloud) -> tuple[float, float]:
    """Per-modality midpoint of the score range: ((min+max)/2 for each)."""
    mn_m, mx_m, mn_t, mx_t = cloud.bounds()
    return ((mn_m + mx_m) / 2.0, (mn_t + mx_t) / 2.0)


def disagreement_rank(
    cloud: WorkScoreCloud, direction: Direction
) -> list[tuple[ScoreRecord, float]]:
    """Candidates whose scores disagree in the given direction, strongest first.

    Only strict inequalities qualify; candidates with equal scores belong to
    neither disagreement group.
    """
    scored: list[tuple[ScoreRecord, float]] = []
    for r in cloud.records:
        if direction is Direction.AUDIO_OVER_TEXT and r.s_music > r.s_text:
            scored.append((r, r.s_music - r.s_text))
        elif direction is Direction.TEXT_OVER_AUDIO and r.s_text > r.s_music:
            scored.append((r, r.s_text - r.s_music))
    scored.sort(key=lambda pair: (-pair[1], pair[0].video_id))
    return scored


def mutual_rank(cloud: WorkScoreCloud) -> list[tuple[ScoreRecord, float]]:
    """All candidates ranked by closeness to the center of uncertainty.

    The score is the negative Euclidean distance to the center, so ranking
    by descending score means ascending distance.  Distances are evaluated
    as sqrt(dm*dm + dt*dt) in double precision (not hypot): candidates
    symmetric about the center then compare exactly equal and fall through
    to the video-id tie rule instead of being split by sub-ulp effects.
    """
    center_m, center_t = mutual_center(cloud)
    scored = []
    for r in cloud.records:
        dm = r.s_music - center_m
        dt = r.s_text - center_t
        scored.append((r, -math.sqrt(dm * dm + dt * dt)))
    scored.sort(key=lambda pair: (-pair[1], pair[0].video_id))
    return scored


@dataclass(frozen=True)
class GroupAssignment:
    work_id: str
    video_id: str
    group: SamplingGroup
    rank_score: float


def select_groups(cloud: WorkScoreCloud, k: int = 3) -> list[GroupAssignment]:
    """Pick the per-work annotation set: top k per group, disjoint.

    Order of assignment is disagr_audio, disagr_text, mutual_unc, each
    skipping candidates already taken.  If disagr_audio yields fewer than k,
    its deficit is filled from the mutual ranking (assigned to mutual_unc),
    so a work contributes at most 3k candidates.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    assigned: set[str] = set()
    out: list[GroupAssignment] = []

    audio = disagreement_rank(cloud, Direction.AUDIO_OVER_TEXT)[:k]
    for rec, score in audio:
        assigned.add(rec.video_id)
        out.append(GroupAssignment(cloud.work_id, rec.video_id, SamplingGroup.DISAGR_AUDIO, score))
    deficit = k - len(audio)

    text = [
        (rec, score)
        for rec, score in disagreement_rank(cloud, Direction.TEXT_OVER_AUDIO)
        if rec.video_id not in assigned
    ][:k]
    for rec, score in text:
        assigned.add(rec.video_id)
        out.append(GroupAssignment(cloud.work_id, rec.video_id, SamplingGroup.DISAGR_TEXT, score))

    mutual = [
        (rec, score)
        for rec, score in mutual_rank(cloud)
        if rec.video_id not in assigned
    ][: k + deficit]
    for rec, score in mutual:
        assigned.add(rec.video_id)
        out.append(GroupAssignment(cloud.work_id, rec.video_id, SamplingGroup.MUTUAL_UNC, score))
    return out


def clouds_from_scores(records: Sequence[ScoreRecord]) -> list[WorkScoreCloud]:
    """Group score records into per-work clouds, sorted by work id."""
    by_work: dict[str, list[ScoreRecord]] = {}
    for r in records:
        by_work.setdefault(r.work_id, []).append(r)
    return [
        WorkScoreCloud(work_id=w, records=tuple(by_work[w])) for w in sorted(by_work)
    ]


def sample_dataset(
    clouds: Sequence[WorkScoreCloud], k: int = 3
) -> list[GroupAssignment]:
    """Concatenated per-work selections, deterministic by work id."""
    seen: set[str] = set()
    for cloud in clouds:
        if cloud.work_id in seen:
            raise DataMismatchError(f"duplicate work_id {cloud.work_id!r} in clouds")
        seen.add(cloud.work_id)
    out: list[GroupAssignment] = []
    for cloud in sorted(clouds, key=lambda c: c.work_id):
        out.extend(select_groups(cloud, k=k))
    return out


def cross_work_candidates(
    assignments: Iterable[GroupAssignment],
) -> dict[str, list[str]]:
    """Video ids sampled for more than one work (permitted, but flagged)."""
    works: dict[str, set[str]] = {}
    for a in assignments:
        works.setdefault(a.video_id, set()).add(a.work_id)
    return {vid: sorted(ws) for vid, ws in sorted(works.items()) if len(ws) > 1}


SAMPLED_HEADER = ("work_id", "video_id", "group", "rank_score")


def write_sampled(path: str | Path, assignments: Sequence[GroupAssignment]) -> None:
    write_tsv(
        path,
        SAMPLED_HEADER,
        (
            [a.work_id, a.video_id, a.group.value, format_float(a.rank_score)]
            for a in assignments
        ),
    )


def read_sampled(path: str | Path) -> list[GroupAssignment]:
    return [
        GroupAssignment(row[0], row[1], SamplingGroup.parse(row[2]), float(row[3]))
        for row in read_tsv(path, SAMPLED_HEADER)
    ]
