"""Three-stage temporal hierarchy: micro-chunks, syntheses, final report.

Stage arithmetic is timestamp-based so variable sampling rates degrade
gracefully: chunk k covers [k*60s, (k+1)*60s) and every sampled frame lands
in exactly one chunk. The deterministic reductions here double as the
rule-based analyzer's computation and as the oracle for any live model.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .errors import ConfigError, EmptySessionError
from .model import SessionData, TrackedStudent
from .posture import LABEL_ORDER, PostureLabel

MICRO_WINDOW_S = 60
MICRO_WINDOW_MS = MICRO_WINDOW_S * 1000
SYNTHESES_PER_GROUP = 5

# Engagement is an auditable frame fraction, not a validated psychometric
# measure: attentive posture with gaze on an instructional region.
ENGAGED_POSTURES = {PostureLabel.UPRIGHT.value, PostureLabel.LEANING_FORWARD.value}
INSTRUCTIONAL_REGIONS = {"board", "screen"}
LOW_ENGAGEMENT_THRESHOLD = 0.3


@dataclass(frozen=True)
class StagePlan:
    n_micro: int
    n_synthesis: int
    n_final: int
    micro_window_s: int = MICRO_WINDOW_S
    syntheses_per_group: int = SYNTHESES_PER_GROUP

    def total_stages(self) -> int:
        return self.n_micro + self.n_synthesis + self.n_final


def plan_stages(duration_s: float) -> StagePlan:
    """Stage counts for a session of the given duration."""
    if duration_s < 0:
        raise ConfigError("duration_s must be non-negative")
    if duration_s == 0:
        raise EmptySessionError("no content to analyze")
    n_micro = math.ceil(duration_s / MICRO_WINDOW_S)
    n_synthesis = math.ceil(n_micro / SYNTHESES_PER_GROUP)
    return StagePlan(n_micro=n_micro, n_synthesis=n_synthesis, n_final=1)


# ---------------------------------------------------------------------------
# payloads


@dataclass(frozen=True)
class ChunkSample:
    """One annotated (track, frame) observation inside a chunk window."""

    frame: int
    t_ms: int
    keypoints: tuple[tuple[float, float, float], ...]
    gaze: tuple[float, float] | None
    posture: str
    region: str

    def to_json_dict(self) -> dict:
        return {
            "frame": self.frame,
            "t_ms": self.t_ms,
            "keypoints": [list(kp) for kp in self.keypoints],
            "gaze": list(self.gaze) if self.gaze else None,
            "posture": self.posture,
            "region": self.region,
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "ChunkSample":
        gaze = doc.get("gaze")
        return ChunkSample(
            frame=doc["frame"],
            t_ms=doc["t_ms"],
            keypoints=tuple(tuple(kp) for kp in doc["keypoints"]),
            gaze=tuple(gaze) if gaze else None,
            posture=doc["posture"],
            region=doc["region"],
        )


@dataclass(frozen=True)
class TrackSamples:
    track_id: int
    samples: tuple[ChunkSample, ...]


@dataclass(frozen=True)
class ChunkPayload:
    chunk_index: int
    t_start_ms: int
    t_end_ms: int
    tracks: tuple[TrackSamples, ...]

    def frame_indices(self) -> list[int]:
        return sorted({s.frame for tr in self.tracks for s in tr.samples})

    def frame_range(self) -> list[int]:
        indices = self.frame_indices()
        return [indices[0], indices[-1]] if indices else []

    def n_frames(self) -> int:
        return len(self.frame_indices())

    def decimate(self, k: int) -> "ChunkPayload":
        """Keep every k-th frame plus the window's first and last frames."""
        if k <= 1:
            return self
        indices = self.frame_indices()
        if len(indices) <= 2:
            return self
        kept = set(indices[::k])
        kept.add(indices[0])
        kept.add(indices[-1])
        tracks = tuple(
            TrackSamples(
                track_id=tr.track_id,
                samples=tuple(s for s in tr.samples if s.frame in kept),
            )
            for tr in self.tracks
        )
        return ChunkPayload(self.chunk_index, self.t_start_ms, self.t_end_ms, tracks)

    def to_json_dict(self) -> dict:
        return {
            "chunk_index": self.chunk_index,
            "window": [self.t_start_ms, self.t_end_ms],
            "tracks": [
                {
                    "track_id": tr.track_id,
                    "samples": [s.to_json_dict() for s in tr.samples],
                }
                for tr in self.tracks
            ],
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "ChunkPayload":
        return ChunkPayload(
            chunk_index=doc["chunk_index"],
            t_start_ms=doc["window"][0],
            t_end_ms=doc["window"][1],
            tracks=tuple(
                TrackSamples(
                    track_id=tr["track_id"],
                    samples=tuple(ChunkSample.from_json_dict(s)
                                  for s in tr["samples"]),
                )
                for tr in doc["tracks"]
            ),
        )


def segment_micro_chunks(
    session: SessionData,
    tracks: list[TrackedStudent],
    labels: dict[tuple[int, int], PostureLabel],
    regions: dict[tuple[int, int], str],
) -> list[ChunkPayload]:
    """Split a session into 60-second chunk payloads with inline annotations.

    Produces exactly plan_stages(session.duration_s()).n_micro payloads;
    windows with no sampled frames yield empty payloads.
    """
    if not session.frames:
        return []
    last_t = session.frames[-1].t_ms
    n_chunks = last_t // MICRO_WINDOW_MS + 1

    frame_times = {fr.index: fr.t_ms for fr in session.frames}
    buckets: dict[int, dict[int, list[ChunkSample]]] = {}
    for track in sorted(tracks, key=lambda t: t.track_id):
        for frame_index in track.frame_indices():
            t_ms = frame_times[frame_index]
            k = t_ms // MICRO_WINDOW_MS
            det = track.detections[frame_index]
            key = (track.track_id, frame_index)
            sample = ChunkSample(
                frame=frame_index,
                t_ms=t_ms,
                keypoints=tuple((kp.x, kp.y, kp.c) for kp in det.keypoints),
                gaze=(det.gaze.gx, det.gaze.gy) if det.gaze else None,
                posture=labels[key].value,
                region=regions.get(key, "unclassified"),
            )
            buckets.setdefault(k, {}).setdefault(track.track_id, []).append(sample)

    payloads = []
    for k in range(n_chunks):
        per_track = buckets.get(k, {})
        payloads.append(ChunkPayload(
            chunk_index=k,
            t_start_ms=k * MICRO_WINDOW_MS,
            t_end_ms=(k + 1) * MICRO_WINDOW_MS,
            tracks=tuple(
                TrackSamples(track_id=tid, samples=tuple(samples))
                for tid, samples in sorted(per_track.items())
            ),
        ))
    return payloads


# ---------------------------------------------------------------------------
# analyses


@dataclass(frozen=True)
class TrackSummary:
    track_id: int
    dominant_posture: str
    transitions: tuple[dict, ...]
    attention: dict[str, float]
    engagement: float
    citations: tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {
            "track_id": self.track_id,
            "dominant_posture": self.dominant_posture,
            "transitions": list(self.transitions),
            "attention": dict(sorted(self.attention.items())),
            "engagement": self.engagement,
            "citations": list(self.citations),
        }


@dataclass(frozen=True)
class ChunkAnalysis:
    chunk_index: int
    frame_range: tuple[int, ...]  # (first, last) or ()
    tracks: tuple[TrackSummary, ...]
    degraded: bool = False

    def citation_errors(self, valid_frames: set[int] | None = None) -> list[str]:
        errors = []
        lo, hi = (self.frame_range + (0, 0))[:2] if self.frame_range else (None, None)
        for tr in self.tracks:
            for cite in tr.citations:
                if lo is None or not lo <= cite <= hi:
                    errors.append(
                        f"track {tr.track_id}: citation {cite} out of range"
                    )
                elif valid_frames is not None and cite not in valid_frames:
                    errors.append(
                        f"track {tr.track_id}: citation {cite} not a chunk frame"
                    )
        return errors

    def to_json_dict(self) -> dict:
        return {
            "chunk_index": self.chunk_index,
            "frame_range": list(self.frame_range),
            "tracks": [tr.to_json_dict() for tr in self.tracks],
            "degraded": self.degraded,
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "ChunkAnalysis":
        if not isinstance(doc.get("chunk_index"), int):
            raise ValueError("chunk_index must be an integer")
        frame_range = doc.get("frame_range")
        if not isinstance(frame_range, list) or len(frame_range) not in (0, 2):
            raise ValueError("frame_range must be [] or [first, last]")
        tracks = []
        for raw in doc.get("tracks", []):
            engagement = raw.get("engagement")
            if (not isinstance(engagement, (int, float))
                    or not 0.0 <= engagement <= 1.0):
                raise ValueError("engagement must lie in [0, 1]")
            if raw.get("dominant_posture") not in {l.value for l in LABEL_ORDER}:
                raise ValueError("dominant_posture must be a posture label")
            citations = raw.get("citations", [])
            if not all(isinstance(c, int) for c in citations):
                raise ValueError("citations must be frame indices")
            tracks.append(TrackSummary(
                track_id=raw["track_id"],
                dominant_posture=raw["dominant_posture"],
                transitions=tuple(raw.get("transitions", [])),
                attention=dict(raw.get("attention", {})),
                engagement=float(engagement),
                citations=tuple(citations),
            ))
        return ChunkAnalysis(
            chunk_index=doc["chunk_index"],
            frame_range=tuple(frame_range),
            tracks=tuple(tracks),
            degraded=bool(doc.get("degraded", False)),
        )


def _modal_label(labels: list[str]) -> str:
    """Most frequent label; ties resolve to the earlier declaration."""
    counts = Counter(labels)
    order = {l.value: i for i, l in enumerate(LABEL_ORDER)}
    return min(counts, key=lambda l: (-counts[l], order.get(l, len(order))))


def reduce_chunk(payload: ChunkPayload) -> ChunkAnalysis:
    """Deterministic per-chunk reduction; the rule-based analyzer's core."""
    summaries = []
    for tr in payload.tracks:
        samples = sorted(tr.samples, key=lambda s: s.frame)
        if not samples:
            continue
        labels = [s.posture for s in samples]
        transitions = []
        for prev, cur in zip(samples, samples[1:]):
            if cur.posture != prev.posture:
                transitions.append({
                    "frame": cur.frame,
                    "t_ms": cur.t_ms,
                    "from": prev.posture,
                    "to": cur.posture,
                })
        region_counts = Counter(s.region for s in samples)
        attention = {
            name: count / len(samples)
            for name, count in sorted(region_counts.items())
        }
        engaged = sum(
            1 for s in samples
            if s.posture in ENGAGED_POSTURES and s.region in INSTRUCTIONAL_REGIONS
        )
        summaries.append(TrackSummary(
            track_id=tr.track_id,
            dominant_posture=_modal_label(labels),
            transitions=tuple(transitions),
            attention=attention,
            engagement=engaged / len(samples),
            citations=tuple(t["frame"] for t in transitions),
        ))
    return ChunkAnalysis(
        chunk_index=payload.chunk_index,
        frame_range=tuple(payload.frame_range()),
        tracks=tuple(summaries),
    )


def group_for_synthesis(analyses: list[ChunkAnalysis]) -> list[list[ChunkAnalysis]]:
    """Consecutive groups of five; the last group carries the remainder."""
    return [
        analyses[i:i + SYNTHESES_PER_GROUP]
        for i in range(0, len(analyses), SYNTHESES_PER_GROUP)
    ]


# ---------------------------------------------------------------------------
# synthesis


@dataclass(frozen=True)
class TrackTrend:
    track_id: int
    mean_engagement: float
    trend: str  # rising | falling | steady
    dominant_posture: str

    def to_json_dict(self) -> dict:
        return {
            "track_id": self.track_id,
            "mean_engagement": self.mean_engagement,
            "trend": self.trend,
            "dominant_posture": self.dominant_posture,
        }


@dataclass(frozen=True)
class SynthesisReport:
    group_index: int
    chunk_indices: tuple[int, ...]
    tracks: tuple[TrackTrend, ...]
    transitions: tuple[dict, ...]
    attention: dict[str, float]
    low_engagement: tuple[dict, ...]

    def to_json_dict(self) -> dict:
        return {
            "group_index": self.group_index,
            "chunk_indices": list(self.chunk_indices),
            "tracks": [tr.to_json_dict() for tr in self.tracks],
            "transitions": list(self.transitions),
            "attention": dict(sorted(self.attention.items())),
            "low_engagement": list(self.low_engagement),
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "SynthesisReport":
        chunk_indices = doc.get("chunk_indices")
        if (not isinstance(chunk_indices, list) or
                not 1 <= len(chunk_indices) <= SYNTHESES_PER_GROUP):
            raise ValueError(
                f"chunk_indices must cover 1..{SYNTHESES_PER_GROUP} chunks"
            )
        return SynthesisReport(
            group_index=doc["group_index"],
            chunk_indices=tuple(chunk_indices),
            tracks=tuple(
                TrackTrend(
                    track_id=tr["track_id"],
                    mean_engagement=float(tr["mean_engagement"]),
                    trend=tr["trend"],
                    dominant_posture=tr["dominant_posture"],
                )
                for tr in doc.get("tracks", [])
            ),
            transitions=tuple(doc.get("transitions", [])),
            attention=dict(doc.get("attention", {})),
            low_engagement=tuple(doc.get("low_engagement", [])),
        )


def _trend(first: float, last: float) -> str:
    if last - first > 0.1:
        return "rising"
    if first - last > 0.1:
        return "falling"
    return "steady"


def _mean_attention(dicts: list[dict[str, float]]) -> dict[str, float]:
    if not dicts:
        return {}
    acc: dict[str, float] = {}
    for d in dicts:
        for name, frac in d.items():
            acc[name] = acc.get(name, 0.0) + frac
    return {name: total / len(dicts) for name, total in sorted(acc.items())}


def reduce_synthesis(group_index: int,
                     analyses: list[ChunkAnalysis]) -> SynthesisReport:
    """Aggregate up to five consecutive chunk analyses into 5-minute trends."""
    if not analyses:
        raise ConfigError("synthesis group must cover at least one analysis")

    per_track: dict[int, list[TrackSummary]] = {}
    for analysis in analyses:
        for tr in analysis.tracks:
            per_track.setdefault(tr.track_id, []).append(tr)

    trends = []
    for track_id, summaries in sorted(per_track.items()):
        engagements = [s.engagement for s in summaries]
        trends.append(TrackTrend(
            track_id=track_id,
            mean_engagement=round(sum(engagements) / len(engagements), 6),
            trend=_trend(engagements[0], engagements[-1]),
            dominant_posture=_modal_label([s.dominant_posture for s in summaries]),
        ))

    transitions = []
    for analysis in analyses:
        for tr in analysis.tracks:
            for t in tr.transitions:
                transitions.append({
                    "t_ms": t["t_ms"],
                    "track_id": tr.track_id,
                    "from": t["from"],
                    "to": t["to"],
                })
    transitions.sort(key=lambda t: (t["t_ms"], t["track_id"]))

    low = []
    for analysis in analyses:
        if not analysis.tracks:
            continue
        engagement = sum(tr.engagement for tr in analysis.tracks) / len(analysis.tracks)
        if engagement < LOW_ENGAGEMENT_THRESHOLD:
            low.append({
                "t_start_ms": analysis.chunk_index * MICRO_WINDOW_MS,
                "t_end_ms": (analysis.chunk_index + 1) * MICRO_WINDOW_MS,
                "engagement": round(engagement, 6),
            })

    attention = _mean_attention(
        [tr.attention for analysis in analyses for tr in analysis.tracks]
    )
    return SynthesisReport(
        group_index=group_index,
        chunk_indices=tuple(a.chunk_index for a in analyses),
        tracks=tuple(trends),
        transitions=tuple(transitions),
        attention=attention,
        low_engagement=tuple(low),
    )


# ---------------------------------------------------------------------------
# final report


@dataclass(frozen=True)
class FinalReport:
    session_id: str
    tracks: tuple[dict, ...]
    attention: dict[str, float]
    flagged_periods: tuple[dict, ...]
    dead_zones: dict
    covered_groups: tuple[int, ...]
    n_chunks: int

    def to_json_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "tracks": list(self.tracks),
            "attention": dict(sorted(self.attention.items())),
            "flagged_periods": list(self.flagged_periods),
            "dead_zones": dict(self.dead_zones),
            "covered_groups": list(self.covered_groups),
            "n_chunks": self.n_chunks,
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "FinalReport":
        if not isinstance(doc.get("session_id"), str):
            raise ValueError("session_id must be a string")
        for key in ("tracks", "flagged_periods", "covered_groups"):
            if not isinstance(doc.get(key), list):
                raise ValueError(f"{key} must be a list")
        if not isinstance(doc.get("attention"), dict):
            raise ValueError("attention must be an object")
        return FinalReport(
            session_id=doc["session_id"],
            tracks=tuple(doc["tracks"]),
            attention=dict(doc["attention"]),
            flagged_periods=tuple(doc["flagged_periods"]),
            dead_zones=dict(doc.get("dead_zones", {})),
            covered_groups=tuple(doc["covered_groups"]),
            n_chunks=int(doc.get("n_chunks", 0)),
        )


def _merge_periods(periods: list[dict]) -> list[dict]:
    """Coalesce touching/overlapping low-engagement windows."""
    merged: list[dict] = []
    for p in sorted(periods, key=lambda p: p["t_start_ms"]):
        if merged and p["t_start_ms"] <= merged[-1]["t_end_ms"]:
            merged[-1]["t_end_ms"] = max(merged[-1]["t_end_ms"], p["t_end_ms"])
            merged[-1]["engagement"] = min(merged[-1]["engagement"], p["engagement"])
        else:
            merged.append(dict(p))
    return [
        {
            "t_start_ms": p["t_start_ms"],
            "t_end_ms": p["t_end_ms"],
            "reason": f"low engagement ({p['engagement']:.2f})",
        }
        for p in merged
    ]


def reduce_final(session_id: str,
                 syntheses: list[SynthesisReport],
                 dead_zones: dict | None = None) -> FinalReport:
    """Whole-session narrative built strictly from this session's syntheses."""
    if not syntheses:
        raise ConfigError("final report requires at least one synthesis")

    per_track: dict[int, list[TrackTrend]] = {}
    for synth in syntheses:
        for tr in synth.tracks:
            per_track.setdefault(tr.track_id, []).append(tr)

    track_docs = []
    for track_id, trends in sorted(per_track.items()):
        mean = sum(t.mean_engagement for t in trends) / len(trends)
        dominant = _modal_label([t.dominant_posture for t in trends])
        trajectory = _trend(trends[0].mean_engagement, trends[-1].mean_engagement)
        narrative = (
            f"Student {track_id} was predominantly "
            f"{PostureLabel(dominant).snake().replace('_', ' ')} with mean "
            f"engagement {mean:.2f}, {trajectory} over the session."
        )
        track_docs.append({
            "track_id": track_id,
            "narrative": narrative,
            "mean_engagement": round(mean, 6),
            "dominant_posture": dominant,
            "trend": trajectory,
        })

    weights = [len(s.chunk_indices) for s in syntheses]
    acc: dict[str, float] = {}
    for synth, w in zip(syntheses, weights):
        for name, frac in synth.attention.items():
            acc[name] = acc.get(name, 0.0) + frac * w
    total_w = sum(weights)
    attention = {name: v / total_w for name, v in sorted(acc.items())}

    flagged = _merge_periods(
        [dict(p) for synth in syntheses for p in synth.low_engagement]
    )

    return FinalReport(
        session_id=session_id,
        tracks=tuple(track_docs),
        attention=attention,
        flagged_periods=tuple(flagged),
        dead_zones=dict(dead_zones or {}),
        covered_groups=tuple(s.group_index for s in syntheses),
        n_chunks=sum(len(s.chunk_indices) for s in syntheses),
    )
