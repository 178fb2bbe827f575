"""Posture classification from BODY_25 keypoint geometry.

The classifier is a fixed-order decision tree over joint angles and
head-drop ratios. All thresholds live in PostureThresholds so pilot tuning
is a config change. Image y grows downward; "below" means larger y.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError
from .model import (
    L_ANKLE, L_HIP, L_KNEE, L_SHOULDER, MID_HIP, NECK, NOSE,
    R_ANKLE, R_HIP, R_KNEE, R_SHOULDER,
    PersonDetection, TrackedStudent,
)


class PostureLabel(str, Enum):
    # Declaration order is the tie-break order for modal-label reductions.
    UPRIGHT = "Upright"
    LEANING_FORWARD = "LeaningForward"
    SLOUCHING = "Slouching"
    SLEEPING = "Sleeping"
    STANDING = "Standing"
    UNKNOWN = "Unknown"

    def snake(self) -> str:
        out = []
        for i, ch in enumerate(self.value):
            if ch.isupper() and i > 0:
                out.append("_")
            out.append(ch.lower())
        return "".join(out)

    @classmethod
    def parse(cls, text: str) -> "PostureLabel":
        key = text.replace("_", "").replace("-", "").replace(" ", "").lower()
        for label in cls:
            if label.value.lower() == key:
                return label
        raise ConfigError(f"unknown posture label {text!r}")


LABEL_ORDER = list(PostureLabel)


@dataclass(frozen=True)
class PostureThresholds:
    min_conf: float = 0.3
    lean_deg: float = 20.0
    slouch_head_ratio: float = 0.25
    sleep_head_ratio: float = 0.60
    stand_leg_deg: float = 150.0

    def __post_init__(self):
        if not 0.0 <= self.min_conf <= 1.0:
            raise ConfigError("min_conf must lie in [0, 1]")
        for name in ("lean_deg", "stand_leg_deg"):
            v = getattr(self, name)
            if not 0.0 < v < 180.0:
                raise ConfigError(f"{name} must lie in (0, 180)")
        for name in ("slouch_head_ratio", "sleep_head_ratio"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")


@dataclass(frozen=True)
class PostureSegment:
    track_id: int
    label: PostureLabel
    t_start_ms: int
    t_end_ms: int
    n_frames: int


def torso_angle(det: PersonDetection, thr: PostureThresholds) -> float | None:
    """Tilt of the mid-hip->neck vector from the upward image vertical, degrees.

    Returns None when neck or mid-hip confidence is below min_conf.
    """
    neck = det.kp(NECK)
    hip = det.kp(MID_HIP)
    if not neck.valid(thr.min_conf) or not hip.valid(thr.min_conf):
        return None
    vx = neck.x - hip.x
    vy = neck.y - hip.y
    # Upward vertical is (0, -1): tilt = atan2(|horizontal|, -vertical).
    return math.degrees(math.atan2(abs(vx), -vy))


def _interior_angle(a, b, c) -> float | None:
    """Angle at b in degrees for the a-b-c chain; None when degenerate."""
    v1 = (a.x - b.x, a.y - b.y)
    v2 = (c.x - b.x, c.y - b.y)
    n1 = math.hypot(*v1)
    n2 = math.hypot(*v2)
    if n1 == 0.0 or n2 == 0.0:
        return None
    cosang = (v1[0] * v2[0] + v1[1] * v2[1]) / (n1 * n2)
    cosang = max(-1.0, min(1.0, cosang))
    return math.degrees(math.acos(cosang))


def _standing_leg(det: PersonDetection, thr: PostureThresholds) -> bool:
    # A side counts only when hip, knee and ankle are all observable.
    for hip_i, knee_i, ankle_i in ((R_HIP, R_KNEE, R_ANKLE),
                                   (L_HIP, L_KNEE, L_ANKLE)):
        hip, knee, ankle = det.kp(hip_i), det.kp(knee_i), det.kp(ankle_i)
        if not (hip.valid(thr.min_conf) and knee.valid(thr.min_conf)
                and ankle.valid(thr.min_conf)):
            continue
        angle = _interior_angle(hip, knee, ankle)
        if angle is not None and angle >= thr.stand_leg_deg:
            return True
    return False


def _shoulder_line_y(det: PersonDetection, thr: PostureThresholds) -> float:
    ys = [det.kp(i).y for i in (R_SHOULDER, L_SHOULDER)
          if det.kp(i).valid(thr.min_conf)]
    if ys:
        return sum(ys) / len(ys)
    return det.kp(NECK).y


def classify_posture(det: PersonDetection,
                     thr: PostureThresholds | None = None) -> PostureLabel:
    """Deterministic decision tree; total over all 25-keypoint inputs.

    Rule order: Unknown, Standing, Sleeping, LeaningForward, Slouching,
    Upright. Standing outranks Sleeping because leg evidence is rarer and
    stronger.
    """
    thr = thr or PostureThresholds()
    angle = torso_angle(det, thr)
    if angle is None:
        return PostureLabel.UNKNOWN

    if _standing_leg(det, thr):
        return PostureLabel.STANDING

    neck = det.kp(NECK)
    hip = det.kp(MID_HIP)
    torso_len = math.hypot(neck.x - hip.x, neck.y - hip.y)
    nose = det.kp(NOSE)

    if nose.valid(thr.min_conf):
        head_drop = nose.y - _shoulder_line_y(det, thr)
        if head_drop >= thr.sleep_head_ratio * torso_len:
            return PostureLabel.SLEEPING

    if angle >= thr.lean_deg:
        return PostureLabel.LEANING_FORWARD

    if nose.valid(thr.min_conf):
        if nose.y - neck.y >= thr.slouch_head_ratio * torso_len:
            return PostureLabel.SLOUCHING

    return PostureLabel.UPRIGHT


def posture_timeline(track: TrackedStudent,
                     frame_times: dict[int, int],
                     thr: PostureThresholds | None = None) -> list[PostureSegment]:
    """Merge per-frame labels into maximal runs of identical labels.

    frame_times maps frame index -> t_ms. Segment boundaries sit on frame
    timestamps and the per-segment n_frames sum to the detection count.
    """
    thr = thr or PostureThresholds()
    indices = track.frame_indices()
    if not indices:
        return []
    labels = [classify_posture(track.detections[i], thr) for i in indices]

    segments: list[PostureSegment] = []
    run_start = 0
    for i in range(1, len(labels) + 1):
        if i < len(labels) and labels[i] == labels[run_start]:
            continue
        first, last = indices[run_start], indices[i - 1]
        segments.append(PostureSegment(
            track_id=track.track_id,
            label=labels[run_start],
            t_start_ms=frame_times[first],
            t_end_ms=frame_times[last],
            n_frames=i - run_start,
        ))
        run_start = i
    return segments


def histogram_from_labels(labelled: list[tuple[int, str]],
                          bin_s: float = 60.0) -> list[dict]:
    """Bin (t_ms, label) pairs; every observation lands in exactly one bin."""
    if bin_s <= 0:
        raise ConfigError("bin_s must be positive")
    bin_ms = int(round(bin_s * 1000))

    counters: dict[int, Counter] = {}
    for t_ms, label in labelled:
        counters.setdefault(t_ms // bin_ms, Counter())[label] += 1

    if not counters:
        return []
    bins = []
    for b in range(max(counters) + 1):
        counts = counters.get(b, Counter())
        bins.append({
            "t_start_ms": b * bin_ms,
            "counts": {label.value: counts.get(label.value, 0)
                       for label in LABEL_ORDER},
        })
    return bins


def posture_histogram(tracks: list[TrackedStudent],
                      frame_times: dict[int, int],
                      thr: PostureThresholds | None = None,
                      bin_s: float = 60.0) -> list[dict]:
    """Per-bin counts of each label across all students, Unknown included."""
    thr = thr or PostureThresholds()
    labelled = [
        (frame_times[fi], classify_posture(track.detections[fi], thr).value)
        for track in tracks
        for fi in track.frame_indices()
    ]
    return histogram_from_labels(labelled, bin_s)


def histogram_to_json_dict(bins: list[dict], bin_s: float) -> dict:
    return {"bin_s": bin_s, "bins": bins}
