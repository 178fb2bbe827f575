"""Greedy per-frame association of detections into per-student tracks.

Classroom subjects are near-stationary, so nearest-neighbor matching on a
single anchor joint with a distance gate is sufficient and trivially
auditable. Identities are never merged: a track that loses its anchor for
more than max_gap_frames is closed, and a reappearing person gets a new id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError
from .model import NECK, PersonDetection, SessionData, TrackedStudent


@dataclass(frozen=True)
class TrackingConfig:
    max_link_distance: float = 80.0
    anchor_joint: int = NECK
    min_anchor_conf: float = 0.3
    max_gap_frames: int = 10  # close a track missing its anchor longer than this

    def __post_init__(self):
        if self.max_link_distance <= 0:
            raise ConfigError("max_link_distance must be positive")
        if not 0 <= self.anchor_joint <= 24:
            raise ConfigError("anchor_joint must be a BODY_25 index")
        if not 0.0 <= self.min_anchor_conf <= 1.0:
            raise ConfigError("min_anchor_conf must lie in [0, 1]")


class _OpenTrack:
    __slots__ = ("track_id", "anchor", "misses", "detections")

    def __init__(self, track_id: int, anchor: tuple[float, float]):
        self.track_id = track_id
        self.anchor = anchor
        self.misses = 0
        self.detections: dict[int, PersonDetection] = {}


def assign_tracks(session: SessionData,
                  cfg: TrackingConfig | None = None) -> list[TrackedStudent]:
    """Associate detections frame-to-frame by anchor-joint proximity.

    Detections whose anchor confidence is below min_anchor_conf join no
    track. Every detection with a valid anchor belongs to exactly one track;
    track ids are assigned in first-appearance order starting at 0.
    """
    cfg = cfg or TrackingConfig()
    open_tracks: list[_OpenTrack] = []
    closed: list[_OpenTrack] = []
    next_id = 0

    for frame in session.frames:
        candidates: list[tuple[int, PersonDetection, tuple[float, float]]] = []
        for pi, person in enumerate(frame.persons):
            anchor = person.kp(cfg.anchor_joint)
            if anchor.c < cfg.min_anchor_conf:
                continue
            candidates.append((pi, person, (anchor.x, anchor.y)))

        # Globally greedy: closest (track, detection) pairs first, each side
        # used at most once, gated by max_link_distance.
        pairs = []
        for ti, track in enumerate(open_tracks):
            for ci, (_, _, pos) in enumerate(candidates):
                d = math.hypot(track.anchor[0] - pos[0], track.anchor[1] - pos[1])
                if d <= cfg.max_link_distance:
                    pairs.append((d, ti, ci))
        pairs.sort()

        used_tracks: set[int] = set()
        used_candidates: set[int] = set()
        for d, ti, ci in pairs:
            if ti in used_tracks or ci in used_candidates:
                continue
            used_tracks.add(ti)
            used_candidates.add(ci)
            track = open_tracks[ti]
            _, person, pos = candidates[ci]
            track.detections[frame.index] = person
            track.anchor = pos
            track.misses = 0

        for ci, (_, person, pos) in enumerate(candidates):
            if ci in used_candidates:
                continue
            track = _OpenTrack(next_id, pos)
            next_id += 1
            track.detections[frame.index] = person
            open_tracks.append(track)

        still_open = []
        for track in open_tracks:
            if frame.index not in track.detections:
                track.misses += 1
            if track.misses > cfg.max_gap_frames:
                closed.append(track)
            else:
                still_open.append(track)
        open_tracks = still_open

    all_tracks = sorted(closed + open_tracks, key=lambda t: t.track_id)
    return [
        TrackedStudent(track_id=t.track_id, detections=dict(t.detections))
        for t in all_tracks
    ]
