"""Deterministic synthetic session generator with ground-truth sidecars.

Real classroom recordings cannot ship with the repo, so this generator is
the primary test oracle: the emitted keypoint geometry is written against
the same geometric definitions the posture classifier decides on, and gaze
targets are sampled inside the scripted layout region. For a fixed seed the
output is byte-identical across runs.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .errors import ConfigError
from .model import (
    ClassroomLayout, FrameRecord, GazeTarget, Keypoint, PersonDetection,
    SessionData, default_classroom_layout,
)
from .posture import PostureLabel

FRAME_W = 1920
FRAME_H = 1080

# Joint offsets relative to the neck (y grows downward), one template per
# posture. Magnitudes are sized so every classifier threshold is cleared
# with a wide margin relative to the jitter amplitude.
_TORSO = 90.0


@dataclass(frozen=True)
class ScriptInterval:
    t_start_s: float
    t_end_s: float
    posture: PostureLabel
    gaze_region: str


@dataclass(frozen=True)
class SyntheticConfig:
    n_students: int = 3
    duration_s: float = 300.0
    sample_hz: float = 0.2
    behavior_script: tuple[tuple[ScriptInterval, ...], ...] = ()
    seed: int = 0
    jitter_px: float = 2.0
    layout: ClassroomLayout = field(default_factory=default_classroom_layout)
    session_id: str = "synthetic"

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")
        if self.sample_hz <= 0:
            raise ConfigError("sample_hz must be positive")
        if self.n_students < 0:
            raise ConfigError("n_students must be non-negative")
        if self.jitter_px < 0:
            raise ConfigError("jitter_px must be non-negative")
        for si, script in enumerate(self.behavior_script):
            ordered = sorted(script, key=lambda iv: iv.t_start_s)
            for a, b in zip(ordered, ordered[1:]):
                if b.t_start_s < a.t_end_s:
                    raise ConfigError(
                        f"student {si}: intervals overlap at {b.t_start_s}s"
                    )
            for iv in script:
                if self.layout.find(iv.gaze_region) is None:
                    raise ConfigError(
                        f"student {si}: unknown gaze region {iv.gaze_region!r}"
                    )


@dataclass(frozen=True)
class GroundTruth:
    track: int
    frame: int
    posture: PostureLabel
    gaze_region: str


def script_from_json(doc: list, layout: ClassroomLayout) -> tuple[tuple[ScriptInterval, ...], ...]:
    """Parse a behavior script: [[{t_start_s, t_end_s, posture, gaze_region}, ...], ...]."""
    scripts = []
    for student in doc:
        scripts.append(tuple(
            ScriptInterval(
                t_start_s=float(iv["t_start_s"]),
                t_end_s=float(iv["t_end_s"]),
                posture=PostureLabel.parse(iv["posture"]),
                gaze_region=iv["gaze_region"],
            )
            for iv in student
        ))
    return tuple(scripts)


def ground_truth_to_json_dict(labels: list[GroundTruth]) -> dict:
    return {
        "labels": [
            {
                "track": gt.track,
                "frame": gt.frame,
                "posture": gt.posture.snake(),
                "gaze_region": gt.gaze_region,
            }
            for gt in labels
        ]
    }


def _seat_positions(n: int) -> list[tuple[float, float]]:
    """Neck anchor per student, a grid inside the seating band of the frame."""
    if n == 0:
        return []
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    x_lo, x_hi = 0.08 * FRAME_W, 0.92 * FRAME_W
    y_lo, y_hi = 0.42 * FRAME_H, 0.72 * FRAME_H
    seats = []
    for i in range(n):
        r, c = divmod(i, cols)
        x = x_lo + (c + 0.5) * (x_hi - x_lo) / cols
        y = y_lo + (r + 0.5) * (y_hi - y_lo) / max(rows, 1)
        seats.append((x, y))
    return seats


def _skeleton(label: PostureLabel, neck_x: float, neck_y: float) -> list[tuple[float, float, float]]:
    """25 (x, y, c) triples realizing the posture's geometric definition.

    Unknown models partial occlusion: the neck stays confidently visible
    (so tracking holds the identity) while the torso and limbs drop below
    the classifier's confidence gate.
    """
    conf = 0.05 if label is PostureLabel.UNKNOWN else 0.9
    side_conf = 0.05 if label is PostureLabel.UNKNOWN else 0.6

    # Torso-local frame: `down` runs neck->mid-hip, tilted forward for the
    # leaning posture; `right` is its image-plane perpendicular.
    lean = math.radians(30.0 if label is PostureLabel.LEANING_FORWARD else 0.0)
    down = (-math.sin(lean), math.cos(lean))
    right = (math.cos(lean), math.sin(lean))

    def local(lx: float, ly: float) -> tuple[float, float]:
        return (neck_x + lx * right[0] + ly * down[0],
                neck_y + lx * right[1] + ly * down[1])

    hip = local(0.0, _TORSO)

    if label is PostureLabel.SLEEPING:
        nose = (neck_x + 10.0, neck_y + 2.0 + 0.8 * _TORSO)  # head on desk
    elif label is PostureLabel.SLOUCHING:
        nose = (neck_x, neck_y + 0.4 * _TORSO)
    else:
        nose = local(0.0, -32.0)

    sh_r = local(-30.0, 2.0)
    sh_l = local(30.0, 2.0)
    eye_r = (nose[0] - 8.0, nose[1] - 4.0)
    eye_l = (nose[0] + 8.0, nose[1] - 4.0)
    ear_r = (nose[0] - 14.0, nose[1] + 2.0)
    ear_l = (nose[0] + 14.0, nose[1] + 2.0)

    elbow_r = (sh_r[0] - 8.0, sh_r[1] + 40.0)
    elbow_l = (sh_l[0] + 8.0, sh_l[1] + 40.0)
    wrist_r = (elbow_r[0] - 2.0, elbow_r[1] + 40.0)
    wrist_l = (elbow_l[0] + 2.0, elbow_l[1] + 40.0)

    hip_r = (hip[0] - 16.0, hip[1])
    hip_l = (hip[0] + 16.0, hip[1])
    if label is PostureLabel.STANDING:
        knee_r = (hip_r[0] + 2.0, hip_r[1] + 80.0)
        knee_l = (hip_l[0] - 2.0, hip_l[1] + 80.0)
        ankle_r = (knee_r[0] + 2.0, knee_r[1] + 80.0)
        ankle_l = (knee_l[0] - 2.0, knee_l[1] + 80.0)
    else:
        # Seated: knees forward, shanks dropping, interior angle ~100 deg.
        knee_r = (hip_r[0] - 60.0, hip_r[1] + 10.0)
        knee_l = (hip_l[0] + 60.0, hip_l[1] + 10.0)
        ankle_r = (knee_r[0] - 4.0, knee_r[1] + 60.0)
        ankle_l = (knee_l[0] + 4.0, knee_l[1] + 60.0)

    toe_r = (ankle_r[0] - 10.0, ankle_r[1] + 12.0)
    toe_l = (ankle_l[0] + 10.0, ankle_l[1] + 12.0)

    pts = {
        0: nose, 1: (neck_x, neck_y), 2: sh_r, 3: elbow_r, 4: wrist_r,
        5: sh_l, 6: elbow_l, 7: wrist_l, 8: hip, 9: hip_r, 10: knee_r,
        11: ankle_r, 12: hip_l, 13: knee_l, 14: ankle_l, 15: eye_r,
        16: eye_l, 17: ear_r, 18: ear_l, 19: toe_l, 20: toe_l, 21: ankle_l,
        22: toe_r, 23: toe_r, 24: ankle_r,
    }
    out = []
    for j in range(25):
        x, y = pts[j]
        c = conf if j in (0, 1, 2, 5, 8, 9, 10, 11, 12, 13, 14) else side_conf
        if j == 1 and label is PostureLabel.UNKNOWN:
            c = 0.9
        out.append((x, y, c))
    return out


def _active_interval(script: tuple[ScriptInterval, ...], t_s: float) -> ScriptInterval | None:
    for iv in script:
        if iv.t_start_s <= t_s < iv.t_end_s:
            return iv
    return None


def generate_synthetic_session(cfg: SyntheticConfig) -> tuple[SessionData, list[GroundTruth]]:
    """Generate a session plus per-frame ground-truth labels.

    Frames where a student's script has no interval fall back to an upright
    posture with gaze on the seating region.
    """
    rng = random.Random(cfg.seed)
    seats = _seat_positions(cfg.n_students)
    period_ms = 1000.0 / cfg.sample_hz
    n_frames = math.ceil(cfg.duration_s * cfg.sample_hz)
    fallback_region = "seating" if cfg.layout.find("seating") else cfg.layout.regions[0].name

    frames: list[FrameRecord] = []
    truth: list[GroundTruth] = []
    for fi in range(n_frames):
        t_ms = int(round(fi * period_ms))
        persons = []
        for si in range(cfg.n_students):
            script = cfg.behavior_script[si] if si < len(cfg.behavior_script) else ()
            interval = _active_interval(script, t_ms / 1000.0)
            if interval is None:
                posture, region_name = PostureLabel.UPRIGHT, fallback_region
            else:
                posture, region_name = interval.posture, interval.gaze_region

            base_x, base_y = seats[si]
            triples = _skeleton(posture, base_x, base_y)
            j = cfg.jitter_px
            keypoints = tuple(
                Keypoint(
                    x=round(x + rng.uniform(-j, j), 2),
                    y=round(y + rng.uniform(-j, j), 2),
                    c=c,
                )
                for x, y, c in triples
            )

            region = cfg.layout.find(region_name)
            x0, y0, x1, y1 = region.rect
            gx = min(x0 + rng.random() * (x1 - x0), math.nextafter(x1, 0.0))
            gy = min(y0 + rng.random() * (y1 - y0), math.nextafter(y1, 0.0))
            gaze = GazeTarget(gx=round(gx, 6), gy=round(gy, 6), score=0.9)

            persons.append(PersonDetection(keypoints=keypoints, gaze=gaze))
            truth.append(GroundTruth(
                track=si, frame=fi, posture=posture, gaze_region=region_name,
            ))
        frames.append(FrameRecord(
            index=fi, t_ms=t_ms, persons=tuple(persons), source_deleted=True,
        ))

    session = SessionData(
        session_id=cfg.session_id,
        frame_width=FRAME_W,
        frame_height=FRAME_H,
        sample_hz=cfg.sample_hz,
        frames=tuple(frames),
    )
    return session, truth
