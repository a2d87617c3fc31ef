import datetime as dt
from pathlib import Path

import numpy as np
import pytest

from coverbench.model import Source, VersionRecord
from coverbench.store import Dataset, EmbeddingStore

FIXTURE_DIR = Path(__file__).parent / "fixtures" / "e2e"


def make_version(
    work_id="w1",
    version_id="1",
    video_id=None,
    title="Title",
    performer="Performer",
    channel="Channel",
    duration_s=180,
    upload_date=None,
    source=Source.SEED,
):
    return VersionRecord(
        work_id=work_id,
        version_id=version_id,
        video_id=video_id if video_id is not None else f"{work_id}_v{version_id}",
        title=title,
        performer=performer,
        channel=channel,
        duration_s=duration_s,
        upload_date=upload_date,
        source=source,
    )


@pytest.fixture
def tiny_seed():
    """Two works with three and two seed versions."""
    versions = [
        make_version("w1", "1", title="Enter Sandman", performer="Metallica"),
        make_version("w1", "2", title="Enter Sandman (live)", performer="Metallica"),
        make_version("w1", "3", title="Enter Sandman piano", performer="Scott D."),
        make_version("w2", "1", title="Summertime", performer="Gershwin"),
        make_version("w2", "2", title="Summertime", performer="Janis Joplin"),
    ]
    return Dataset(versions=versions)


def make_store(vectors: dict[str, list[float]]) -> EmbeddingStore:
    ids = list(vectors)
    rows = np.asarray([vectors[i] for i in ids], dtype=np.float32)
    return EmbeddingStore(
        dim=rows.shape[1], rows=rows, index={vid: i for i, vid in enumerate(ids)}
    )
