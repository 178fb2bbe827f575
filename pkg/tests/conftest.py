import json

import pytest

from classpulse.model import (
    FrameRecord, GazeTarget, Keypoint, PersonDetection, SessionData,
    default_classroom_layout,
)


def make_keypoints(overrides: dict[int, tuple[float, float, float]] | None = None,
                   base_conf: float = 0.9) -> tuple[Keypoint, ...]:
    """25 keypoints at a benign upright-ish geometry, selectively overridden."""
    pts = {
        0: (500.0, 268.0), 1: (500.0, 300.0), 2: (470.0, 302.0),
        5: (530.0, 302.0), 8: (500.0, 390.0), 9: (484.0, 390.0),
        10: (424.0, 400.0), 11: (420.0, 460.0), 12: (516.0, 390.0),
        13: (576.0, 400.0), 14: (580.0, 460.0),
    }
    kps = []
    for j in range(25):
        x, y = pts.get(j, (500.0, 340.0))
        c = base_conf
        if overrides and j in overrides:
            x, y, c = overrides[j]
        kps.append(Keypoint(x, y, c))
    return tuple(kps)


def make_person(overrides=None, base_conf: float = 0.9,
                gaze: GazeTarget | None = None) -> PersonDetection:
    return PersonDetection(keypoints=make_keypoints(overrides, base_conf),
                           gaze=gaze)


def make_session(frames_spec, session_id="test", frame_width=1920,
                 frame_height=1080, sample_hz=0.2) -> SessionData:
    """frames_spec: list of (t_ms, [PersonDetection, ...]) or
    (t_ms, persons, source_deleted)."""
    frames = []
    for i, spec in enumerate(frames_spec):
        t_ms, persons = spec[0], spec[1]
        deleted = spec[2] if len(spec) > 2 else True
        frames.append(FrameRecord(index=i, t_ms=t_ms, persons=tuple(persons),
                                  source_deleted=deleted))
    return SessionData(session_id=session_id, frame_width=frame_width,
                       frame_height=frame_height, sample_hz=sample_hz,
                       frames=tuple(frames))


def session_json(n_frames=1, n_persons=1, conf=0.9, gaze=None,
                 source_deleted=True, **extra) -> bytes:
    """Raw wire-format JSON for parse tests."""
    frames = []
    for i in range(n_frames):
        persons = []
        for _ in range(n_persons):
            person = {"keypoints": [[812.0, 402.5, conf]] * 25}
            if gaze is not None:
                person["gaze"] = gaze
            persons.append(person)
        frames.append({"index": i, "t_ms": i * 5000,
                       "source_deleted": source_deleted, "persons": persons})
    doc = {"session_id": "s-1", "frame_width": 1920, "frame_height": 1080,
           "sample_hz": 0.2, "frames": frames}
    doc.update(extra)
    return json.dumps(doc).encode()


@pytest.fixture
def layout():
    return default_classroom_layout()
