"""Core domain types and the session/layout JSON wire formats.

Everything here is an immutable value; parsing validates every invariant and
reports a locatable frame/person index on failure. The session JSON schema is
the privacy boundary: it is the only representation of a recording that is
allowed to persist, and it contains geometry only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import (
    LayoutError,
    OrderingError,
    RangeError,
    SchemaError,
    SessionParseError,
)

N_KEYPOINTS = 25

# BODY_25 indices used by downstream geometry. The layout is the standard
# 25-point skeleton: 0=nose, 1=neck, 2/5=shoulders, 8=mid-hip, 9/12=hips,
# 10/13=knees, 11/14=ankles.
NOSE = 0
NECK = 1
R_SHOULDER = 2
L_SHOULDER = 5
MID_HIP = 8
R_HIP, R_KNEE, R_ANKLE = 9, 10, 11
L_HIP, L_KNEE, L_ANKLE = 12, 13, 14


@dataclass(frozen=True)
class Keypoint:
    """One skeleton joint: pixel position plus detection confidence.

    A keypoint with c == 0 carries no positional meaning; consumers must gate
    on c and never interpret x/y for it.
    """

    x: float
    y: float
    c: float

    def valid(self, min_conf: float) -> bool:
        return self.c >= min_conf


@dataclass(frozen=True)
class GazeTarget:
    """Most-attended frame location, normalized to [0,1]^2."""

    gx: float
    gy: float
    score: float


@dataclass(frozen=True)
class PersonDetection:
    """One person in one frame: exactly 25 keypoints plus an optional gaze."""

    keypoints: tuple[Keypoint, ...]
    gaze: GazeTarget | None = None

    def __post_init__(self):
        if len(self.keypoints) != N_KEYPOINTS:
            raise SchemaError(
                f"expected {N_KEYPOINTS} keypoints, got {len(self.keypoints)}"
            )

    def kp(self, index: int) -> Keypoint:
        return self.keypoints[index]


@dataclass(frozen=True)
class FrameRecord:
    index: int
    t_ms: int
    persons: tuple[PersonDetection, ...]
    source_deleted: bool


@dataclass(frozen=True)
class SessionData:
    """A full recording's extracted geometry: frames x persons x keypoints."""

    session_id: str
    frame_width: int
    frame_height: int
    sample_hz: float
    frames: tuple[FrameRecord, ...]

    def duration_s(self) -> float:
        """Planning duration: covers the last frame's timestamp inclusively."""
        if not self.frames:
            return 0.0
        return (self.frames[-1].t_ms + 1) / 1000.0


@dataclass(frozen=True)
class TrackedStudent:
    """Per-student identity: frame index -> detection, stable within a session."""

    track_id: int
    detections: dict[int, PersonDetection] = field(default_factory=dict)

    def frame_indices(self) -> list[int]:
        return sorted(self.detections)


@dataclass(frozen=True)
class Region:
    name: str
    rect: tuple[float, float, float, float]  # (x0, y0, x1, y1), normalized

    def contains(self, gx: float, gy: float) -> bool:
        # Half-open containment so adjacent regions never both claim a point.
        x0, y0, x1, y1 = self.rect
        return x0 <= gx < x1 and y0 <= gy < y1


@dataclass(frozen=True)
class ClassroomLayout:
    layout_id: str
    regions: tuple[Region, ...]

    def region_names(self) -> list[str]:
        return [r.name for r in self.regions]

    def find(self, name: str) -> Region | None:
        for r in self.regions:
            if r.name == name:
                return r
        return None


@dataclass(frozen=True)
class RetentionReport:
    """Audit of the frame-retention contract for one session."""

    frames_total: int
    frames_deleted: int
    offending_indices: tuple[int, ...]

    @property
    def clean(self) -> bool:
        return not self.offending_indices

    def to_json_dict(self) -> dict:
        return {
            "frames_total": self.frames_total,
            "frames_deleted": self.frames_deleted,
            "offending_indices": list(self.offending_indices),
            "clean": self.clean,
        }


# ---------------------------------------------------------------------------
# parsing


def _check_unit(value: float, what: str, locus: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaError(f"{locus}: {what} must be a number")
    if math.isnan(value) or not 0.0 <= value <= 1.0:
        raise RangeError(f"{locus}: {what} {value!r} outside [0, 1]")
    return float(value)


def _parse_keypoints(raw, locus: str) -> tuple[Keypoint, ...]:
    if not isinstance(raw, list):
        raise SchemaError(f"{locus}: keypoints must be a list")
    if len(raw) != N_KEYPOINTS:
        raise SchemaError(
            f"{locus}: expected {N_KEYPOINTS} keypoints, got {len(raw)}"
        )
    kps = []
    for j, triple in enumerate(raw):
        if not isinstance(triple, list) or len(triple) != 3:
            raise SchemaError(f"{locus}: keypoint {j} must be an [x, y, c] triple")
        x, y, c = triple
        c = _check_unit(c, f"keypoint {j} confidence", locus)
        kps.append(Keypoint(float(x), float(y), c))
    return tuple(kps)


def _parse_gaze(raw, locus: str) -> GazeTarget | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise SchemaError(f"{locus}: gaze must be an object or null")
    gx = _check_unit(raw.get("gx"), "gaze gx", locus)
    gy = _check_unit(raw.get("gy"), "gaze gy", locus)
    score = _check_unit(raw.get("score", 1.0), "gaze score", locus)
    return GazeTarget(gx, gy, score)


def _parse_person(raw, locus: str) -> PersonDetection:
    if not isinstance(raw, dict):
        raise SchemaError(f"{locus}: person must be an object")
    kps = _parse_keypoints(raw.get("keypoints"), locus)
    gaze = _parse_gaze(raw.get("gaze"), locus)
    return PersonDetection(keypoints=kps, gaze=gaze)


def parse_session(raw_bytes: bytes | str) -> SessionData:
    """Parse and validate session JSON.

    Raises:
        SessionParseError: malformed JSON (message names the byte offset).
        SchemaError: structural violation (message names frame/person).
        OrderingError: non-monotonic frame timestamps.
        RangeError: confidence or gaze coordinate outside [0, 1].
    """
    if isinstance(raw_bytes, bytes):
        raw_bytes = raw_bytes.decode("utf-8")
    try:
        doc = json.loads(raw_bytes)
    except json.JSONDecodeError as e:
        raise SessionParseError(f"malformed JSON at byte {e.pos}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise SchemaError("session document must be a JSON object")

    session_id = doc.get("session_id")
    if not isinstance(session_id, str) or not session_id:
        raise SchemaError("session_id must be a non-empty string")
    width = doc.get("frame_width")
    height = doc.get("frame_height")
    hz = doc.get("sample_hz")
    if not isinstance(width, int) or width <= 0:
        raise SchemaError("frame_width must be a positive integer")
    if not isinstance(height, int) or height <= 0:
        raise SchemaError("frame_height must be a positive integer")
    if not isinstance(hz, (int, float)) or isinstance(hz, bool) or hz <= 0:
        raise SchemaError("sample_hz must be a positive number")

    raw_frames = doc.get("frames", [])
    if not isinstance(raw_frames, list):
        raise SchemaError("frames must be a list")

    frames: list[FrameRecord] = []
    prev_t: int | None = None
    prev_index: int | None = None
    for fi, raw_frame in enumerate(raw_frames):
        if not isinstance(raw_frame, dict):
            raise SchemaError(f"frame {fi}: must be an object")
        index = raw_frame.get("index")
        t_ms = raw_frame.get("t_ms")
        if not isinstance(index, int) or index < 0:
            raise SchemaError(f"frame {fi}: index must be a non-negative integer")
        if not isinstance(t_ms, int) or t_ms < 0:
            raise SchemaError(f"frame {fi}: t_ms must be a non-negative integer")
        if prev_index is not None and index <= prev_index:
            raise SchemaError(f"frame {fi}: index {index} not increasing")
        if prev_t is not None and t_ms <= prev_t:
            raise OrderingError(
                f"frame {fi}: t_ms {t_ms} does not increase past {prev_t}"
            )
        source_deleted = raw_frame.get("source_deleted")
        if not isinstance(source_deleted, bool):
            raise SchemaError(f"frame {fi}: source_deleted must be a boolean")
        raw_persons = raw_frame.get("persons", [])
        if not isinstance(raw_persons, list):
            raise SchemaError(f"frame {fi}: persons must be a list")
        persons = tuple(
            _parse_person(p, f"frame {fi}, person {pi}")
            for pi, p in enumerate(raw_persons)
        )
        frames.append(
            FrameRecord(index=index, t_ms=t_ms, persons=persons,
                        source_deleted=source_deleted)
        )
        prev_t, prev_index = t_ms, index

    return SessionData(
        session_id=session_id,
        frame_width=width,
        frame_height=height,
        sample_hz=float(hz),
        frames=tuple(frames),
    )


def serialize_session(session: SessionData) -> bytes:
    """Serialize to the wire format. Keypoints with c == 0 write x = y = 0."""
    frames = []
    for fr in session.frames:
        persons = []
        for p in fr.persons:
            triples = [
                [kp.x, kp.y, kp.c] if kp.c > 0 else [0.0, 0.0, 0.0]
                for kp in p.keypoints
            ]
            entry: dict = {"keypoints": triples}
            if p.gaze is not None:
                entry["gaze"] = {
                    "gx": p.gaze.gx, "gy": p.gaze.gy, "score": p.gaze.score,
                }
            persons.append(entry)
        frames.append({
            "index": fr.index,
            "t_ms": fr.t_ms,
            "source_deleted": fr.source_deleted,
            "persons": persons,
        })
    doc = {
        "session_id": session.session_id,
        "frame_width": session.frame_width,
        "frame_height": session.frame_height,
        "sample_hz": session.sample_hz,
        "frames": frames,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def validate_retention(session: SessionData) -> RetentionReport:
    """Pure audit: list every frame whose source was not deleted."""
    offending = tuple(fr.index for fr in session.frames if not fr.source_deleted)
    return RetentionReport(
        frames_total=len(session.frames),
        frames_deleted=len(session.frames) - len(offending),
        offending_indices=offending,
    )


# ---------------------------------------------------------------------------
# layouts


def parse_layout(raw_bytes: bytes | str) -> ClassroomLayout:
    if isinstance(raw_bytes, bytes):
        raw_bytes = raw_bytes.decode("utf-8")
    try:
        doc = json.loads(raw_bytes)
    except json.JSONDecodeError as e:
        raise SessionParseError(f"malformed JSON at byte {e.pos}: {e.msg}") from e
    return layout_from_json_dict(doc)


def layout_from_json_dict(doc) -> ClassroomLayout:
    if not isinstance(doc, dict):
        raise LayoutError("layout document must be a JSON object")
    layout_id = doc.get("layout_id")
    if not isinstance(layout_id, str) or not layout_id:
        raise LayoutError("layout_id must be a non-empty string")
    raw_regions = doc.get("regions")
    if not isinstance(raw_regions, list) or not raw_regions:
        raise LayoutError("regions must be a non-empty list")
    regions = []
    for i, raw in enumerate(raw_regions):
        if not isinstance(raw, dict) or not isinstance(raw.get("name"), str):
            raise LayoutError(f"region {i}: must be an object with a name")
        rect = raw.get("rect")
        if not isinstance(rect, list) or len(rect) != 4:
            raise LayoutError(f"region {i}: rect must be [x0, y0, x1, y1]")
        x0, y0, x1, y1 = (float(v) for v in rect)
        if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
            raise LayoutError(
                f"region {i} ({raw['name']}): rect {rect} violates "
                "0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1"
            )
        regions.append(Region(name=raw["name"], rect=(x0, y0, x1, y1)))
    return ClassroomLayout(layout_id=layout_id, regions=tuple(regions))


def layout_to_json_dict(layout: ClassroomLayout) -> dict:
    return {
        "layout_id": layout.layout_id,
        "regions": [{"name": r.name, "rect": list(r.rect)} for r in layout.regions],
    }


def default_classroom_layout() -> ClassroomLayout:
    """Built-in layout with the standard region vocabulary, non-overlapping."""
    return ClassroomLayout(
        layout_id="default-room",
        regions=(
            Region("board", (0.05, 0.0, 0.55, 0.35)),
            Region("screen", (0.60, 0.0, 0.95, 0.35)),
            Region("door", (0.95, 0.0, 1.0, 0.35)),
            Region("desk", (0.05, 0.75, 0.95, 1.0)),
            Region("seating", (0.05, 0.40, 0.95, 0.75)),
        ),
    )
