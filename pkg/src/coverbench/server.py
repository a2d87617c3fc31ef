"""HTTP serve layer backing the expert curation workflow.

Single-curator REST interface over the label store.  Reads may run
concurrently; writes serialize through a lock and are durable (atomic file
replace) before the response is acknowledged.

Routes:

* ``GET /api/vocab`` - relevance and uncertainty vocabularies
* ``GET /api/batches`` - per-work batch summaries, undecided-first
* ``GET /api/batch/{work_id}`` - full batch view for curation
* ``POST /api/batch/{work_id}/label`` - submit one expert label
* ``GET /api/progress`` - counts of items, labels, remaining undecided
* ``GET /api/export`` - the curation table, importable by merge_curation
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Sequence

from .annotation import (
    CURATION_HEADER,
    CurationRow,
    Hit,
    VoteResult,
    write_curation,
)
from .errors import LockError, SchemaError
from .model import (
    RelevanceLabel,
    UncertaintyClass,
    VersionRecord,
    uncertainty_classes,
)
from .store import Dataset, escape_field

VIDEO_URL_PREFIX = "https://youtu.be/"


class CurationStore:
    """Expert labels keyed by video id, persisted to one TSV file."""

    def __init__(self, path: str | Path, rows: Sequence[CurationRow] = ()):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._rows: dict[str, CurationRow] = {r.video_id: r for r in rows}

    @classmethod
    def open(cls, path: str | Path) -> "CurationStore":
        from .annotation import read_curation

        path = Path(path)
        rows = read_curation(path) if path.exists() else []
        return cls(path, rows)

    def submit(self, row: CurationRow) -> None:
        with self._lock:
            self._rows[row.video_id] = row
            self._flush()

    def _flush(self) -> None:
        write_curation(self.path, self.rows())

    def rows(self) -> list[CurationRow]:
        return [self._rows[vid] for vid in sorted(self._rows)]

    def get(self, video_id: str) -> CurationRow | None:
        return self._rows.get(video_id)

    def export_text(self) -> str:
        lines = ["\t".join(CURATION_HEADER)]
        for r in self.rows():
            lines.append(
                "\t".join(
                    escape_field(c)
                    for c in (r.video_id, r.relevance.canonical, r.uncertainty.name, r.note)
                )
            )
        return "\n".join(lines) + "\n"


@dataclass
class CurationApp:
    """Request-independent state shared by all handler threads."""

    dataset: Dataset
    hits: Sequence[Hit]
    votes: Sequence[VoteResult]
    store: CurationStore
    worker_labels: dict[tuple[str, str], list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._versions = {v.video_id: v for v in self.dataset.versions}
        self._votes_by_work: dict[str, list[VoteResult]] = {}
        for v in self.votes:
            self._votes_by_work.setdefault(v.work_id, []).append(v)
        self._hits_by_work = {h.work_id: h for h in self.hits}
        self._vocab = {
            "relevance": [l.canonical for l in RelevanceLabel],
            "uncertainty": [
                {
                    "name": c.name,
                    "scope": c.scope.value if c.scope else None,
                    "code": c.code.value if c.code else None,
                }
                for c in uncertainty_classes()
            ],
        }
        self._uncertainty_names = {c.name for c in uncertainty_classes()}

    # -- views ------------------------------------------------------------

    def _n_undecided(self, work_id: str) -> int:
        return sum(
            1
            for v in self._votes_by_work.get(work_id, [])
            if v.final is None and self.store.get(v.video_id) is None
        )

    def batch_order(self) -> list[str]:
        works = sorted(self._votes_by_work)
        return sorted(works, key=lambda w: (self._n_undecided(w) == 0, w))

    def batches_view(self) -> list[dict]:
        out = []
        for work_id in self.batch_order():
            votes = self._votes_by_work[work_id]
            out.append(
                {
                    "work_id": work_id,
                    "n_candidates": len(votes),
                    "n_undecided": self._n_undecided(work_id),
                    "n_curated": sum(
                        1 for v in votes if self.store.get(v.video_id) is not None
                    ),
                }
            )
        return out

    def _version_view(self, record: VersionRecord | None, video_id: str) -> dict:
        view = {
            "video_id": video_id,
            "url": VIDEO_URL_PREFIX + video_id,
            "title": record.title if record else "",
            "performer": record.performer if record else "",
            "channel": record.channel if record else "",
        }
        return view

    def batch_view(self, work_id: str) -> dict | None:
        votes = self._votes_by_work.get(work_id)
        if votes is None:
            return None
        hit = self._hits_by_work.get(work_id)
        query = hit.query_version if hit else None
        candidates = []
        for v in votes:
            expert = self.store.get(v.video_id)
            candidates.append(
                {
                    **self._version_view(self._versions.get(v.video_id), v.video_id),
                    "tally": {
                        label.canonical: count for label, count in sorted(v.tally.items())
                    },
                    "vote_final": v.final.canonical if v.final is not None else None,
                    "worker_labels": self.worker_labels.get(
                        (work_id, v.video_id), []
                    ),
                    "expert_relevance": expert.relevance.canonical if expert else None,
                    "expert_uncertainty": expert.uncertainty.name if expert else None,
                    "expert_note": expert.note if expert else None,
                }
            )
        return {
            "work_id": work_id,
            "query": self._version_view(query, query.video_id if query else ""),
            "candidates": candidates,
        }

    def progress_view(self) -> dict:
        n_items = sum(len(v) for v in self._votes_by_work.values())
        n_labeled = 0
        n_undecided = 0
        for votes in self._votes_by_work.values():
            for v in votes:
                if self.store.get(v.video_id) is not None:
                    n_labeled += 1
                elif v.final is None:
                    n_undecided += 1
        return {
            "n_items": n_items,
            "n_labeled": n_labeled,
            "n_undecided_remaining": n_undecided,
            "n_batches": len(self._votes_by_work),
        }

    # -- mutations ----------------------------------------------------------

    def submit_label(self, work_id: str, payload: dict) -> tuple[int, dict]:
        votes = self._votes_by_work.get(work_id)
        if votes is None:
            return 404, {"error": f"unknown batch {work_id!r}"}
        video_id = payload.get("video_id")
        if video_id not in {v.video_id for v in votes}:
            return 404, {"error": f"unknown video_id {video_id!r} in batch {work_id!r}"}
        relevance_text = payload.get("relevance")
        try:
            relevance = RelevanceLabel.parse(relevance_text or "")
        except SchemaError:
            return 400, {"error": f"invalid relevance {relevance_text!r}"}
        unc_name = payload.get("uncertainty_class") or "none"
        if unc_name not in self._uncertainty_names:
            return 400, {"error": f"invalid uncertainty_class {unc_name!r}"}
        unc = next(c for c in uncertainty_classes() if c.name == unc_name)
        note = str(payload.get("note") or "")
        row = CurationRow(
            video_id=video_id, relevance=relevance, uncertainty=unc, note=note
        )
        self.store.submit(row)
        return 200, {
            "ok": True,
            "video_id": video_id,
            "relevance": relevance.canonical,
            "uncertainty_class": unc.name,
            "note": note,
        }


def _make_handler(app: CurationApp):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send_json(self, status: int, payload) -> None:
            body = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _send_text(self, status: int, text: str, content_type: str) -> None:
            body = text.encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            path = self.path.split("?")[0].rstrip("/") or "/"
            if path == "/api/vocab":
                self._send_json(200, app._vocab)
            elif path == "/api/batches":
                self._send_json(200, app.batches_view())
            elif path.startswith("/api/batch/"):
                work_id = path[len("/api/batch/") :]
                view = app.batch_view(work_id)
                if view is None:
                    self._send_json(404, {"error": f"unknown batch {work_id!r}"})
                else:
                    self._send_json(200, view)
            elif path == "/api/progress":
                self._send_json(200, app.progress_view())
            elif path == "/api/export":
                self._send_text(
                    200, app.store.export_text(), "text/tab-separated-values; charset=utf-8"
                )
            else:
                self._send_json(404, {"error": f"unknown route {path!r}"})

        def do_POST(self):
            path = self.path.split("?")[0].rstrip("/")
            if path.startswith("/api/batch/") and path.endswith("/label"):
                work_id = path[len("/api/batch/") : -len("/label")]
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length)
                try:
                    payload = json.loads(raw.decode("utf-8")) if raw else {}
                except json.JSONDecodeError:
                    self._send_json(400, {"error": "request body is not valid JSON"})
                    return
                status, response = app.submit_label(work_id, payload)
                self._send_json(status, response)
            else:
                self._send_json(404, {"error": f"unknown route {path!r}"})

    return Handler


def create_server(app: CurationApp, host: str, port: int) -> ThreadingHTTPServer:
    try:
        return ThreadingHTTPServer((host, port), _make_handler(app))
    except OSError as exc:
        raise LockError(f"cannot bind {host}:{port} ({exc})") from None
