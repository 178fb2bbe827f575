"""File-backed persistence: directory-per-job, JSON artifacts, JSONL logs.

Artifacts are write-once and auditable; the privacy story is "inspect the
directory". Writes go through a temp file + rename so a crash never leaves
a half-written artifact. scan_image_signatures is the privacy tripwire used
by the audit suite: nothing under the data directory may ever look like an
image or video container.
"""

from __future__ import annotations

import dataclasses
import json
import os
import uuid
from pathlib import Path

from .errors import NotFoundError
from .model import (
    ClassroomLayout, RetentionReport, SessionData,
    layout_from_json_dict, layout_to_json_dict,
    parse_session, serialize_session, validate_retention,
)

_JPEG_MAGIC = b"\xff\xd8\xff"
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _write_json(path: Path, doc) -> None:
    _write_atomic(path, json.dumps(doc, sort_keys=True, indent=2).encode("utf-8"))


def _read_json(path: Path):
    if not path.exists():
        raise NotFoundError(f"{path.name} not found")
    return json.loads(path.read_text(encoding="utf-8"))


class FileStore:
    """All persisted state for the service, rooted at one data directory."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        self.sessions_dir = self.root / "sessions"
        self.layouts_dir = self.root / "layouts"
        self.jobs_dir = self.root / "jobs"
        for d in (self.sessions_dir, self.layouts_dir, self.jobs_dir):
            d.mkdir(parents=True, exist_ok=True)

    # -- sessions --------------------------------------------------------

    def save_session(self, session: SessionData) -> tuple[str, RetentionReport]:
        """Persist under a fresh server-assigned id; stores the retention
        report alongside."""
        session_id = f"s-{uuid.uuid4().hex[:12]}"
        session = dataclasses.replace(session, session_id=session_id)
        report = validate_retention(session)
        _write_atomic(self.sessions_dir / f"{session_id}.json",
                      serialize_session(session))
        _write_json(self.sessions_dir / f"{session_id}.retention.json",
                    report.to_json_dict())
        return session_id, report

    def has_session(self, session_id: str) -> bool:
        return (self.sessions_dir / f"{session_id}.json").exists()

    def load_session(self, session_id: str) -> SessionData:
        path = self.sessions_dir / f"{session_id}.json"
        if not path.exists():
            raise NotFoundError(f"session {session_id} not found")
        return parse_session(path.read_bytes())

    def load_retention(self, session_id: str) -> dict:
        return _read_json(self.sessions_dir / f"{session_id}.retention.json")

    # -- layouts ---------------------------------------------------------

    def save_layout(self, layout: ClassroomLayout) -> str:
        _write_json(self.layouts_dir / f"{layout.layout_id}.json",
                    layout_to_json_dict(layout))
        return layout.layout_id

    def has_layout(self, layout_id: str) -> bool:
        return (self.layouts_dir / f"{layout_id}.json").exists()

    def load_layout(self, layout_id: str) -> ClassroomLayout:
        path = self.layouts_dir / f"{layout_id}.json"
        if not path.exists():
            raise NotFoundError(f"layout {layout_id} not found")
        return layout_from_json_dict(_read_json(path))

    def list_layouts(self) -> list[str]:
        return sorted(
            p.stem for p in self.layouts_dir.glob("*.json")
        )

    # -- jobs ------------------------------------------------------------

    def job_dir(self, job_id: str) -> Path:
        return self.jobs_dir / job_id

    def new_job_id(self) -> str:
        return f"j-{uuid.uuid4().hex[:12]}"

    def save_job(self, job_doc: dict) -> None:
        _write_json(self.job_dir(job_doc["job_id"]) / "job.json", job_doc)

    def load_job(self, job_id: str) -> dict:
        path = self.job_dir(job_id) / "job.json"
        if not path.exists():
            raise NotFoundError(f"job {job_id} not found")
        return _read_json(path)

    def has_job(self, job_id: str) -> bool:
        return (self.job_dir(job_id) / "job.json").exists()

    def list_jobs(self) -> list[dict]:
        docs = []
        for path in sorted(self.jobs_dir.glob("*/job.json")):
            docs.append(_read_json(path))
        docs.sort(key=lambda d: (d.get("created_at", 0), d["job_id"]))
        return docs

    def append_event(self, job_id: str, event_doc: dict) -> None:
        path = self.job_dir(job_id) / "events.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as f:
            f.write(json.dumps(event_doc, sort_keys=True) + "\n")

    def read_events(self, job_id: str) -> list[dict]:
        path = self.job_dir(job_id) / "events.jsonl"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines() if line]

    def append_ledger_event(self, job_id: str, event_doc: dict) -> None:
        path = self.job_dir(job_id) / "ledger.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as f:
            f.write(json.dumps(event_doc, sort_keys=True) + "\n")

    def read_ledger_events(self, job_id: str) -> list[dict]:
        path = self.job_dir(job_id) / "ledger.jsonl"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines() if line]

    # -- per-job artifacts -------------------------------------------------

    def save_artifact(self, job_id: str, relpath: str, doc) -> None:
        _write_json(self.job_dir(job_id) / relpath, doc)

    def load_artifact(self, job_id: str, relpath: str):
        return _read_json(self.job_dir(job_id) / relpath)

    def has_artifact(self, job_id: str, relpath: str) -> bool:
        return (self.job_dir(job_id) / relpath).exists()

    def list_artifacts(self, job_id: str, subdir: str) -> list[str]:
        d = self.job_dir(job_id) / subdir
        if not d.exists():
            return []
        return sorted(p.name for p in d.glob("*.json"))


def scan_image_signatures(root: str | Path) -> list[Path]:
    """Byte-level audit: files containing JPEG/PNG magic anywhere, or an MP4
    ftyp box at offset 4. Returns offending paths (expected: none, ever)."""
    offenders = []
    for path in sorted(Path(root).rglob("*")):
        if not path.is_file():
            continue
        data = path.read_bytes()
        if _JPEG_MAGIC in data or _PNG_MAGIC in data:
            offenders.append(path)
        elif len(data) >= 12 and data[4:8] == b"ftyp":
            offenders.append(path)
    return offenders
