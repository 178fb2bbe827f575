"""In-process pipeline stages shared by the orchestrator and the CLI."""

from __future__ import annotations

from dataclasses import dataclass

from .config import ServiceConfig
from .engine import (
    AnalyzerClient, FinalPayload, Stage, SynthesisPayload, TokenBudget,
    build_prompt, run_analyzer,
)
from .gaze import (
    AttentionHeatmap, accumulate_heatmap, classify_attention, dead_zone_report,
)
from .model import ClassroomLayout, GazeTarget, SessionData, TrackedStudent
from .pipeline import (
    ChunkAnalysis, FinalReport, SynthesisReport,
    group_for_synthesis, reduce_final, reduce_synthesis, segment_micro_chunks,
)
from .posture import PostureLabel, classify_posture
from .tracking import assign_tracks


@dataclass
class VisionResult:
    tracks: list[TrackedStudent]
    labels: dict[tuple[int, int], PostureLabel]
    regions: dict[tuple[int, int], str]
    heatmap: AttentionHeatmap
    dead_zones: dict
    frame_times: dict[int, int]

    def timeline_json(self) -> dict:
        """Per-track annotated samples, the basis for windowed re-queries."""
        tracks = []
        for track in sorted(self.tracks, key=lambda t: t.track_id):
            samples = []
            for fi in track.frame_indices():
                det = track.detections[fi]
                key = (track.track_id, fi)
                samples.append({
                    "frame": fi,
                    "t_ms": self.frame_times[fi],
                    "posture": self.labels[key].value,
                    "region": self.regions.get(key, "unclassified"),
                    "gx": det.gaze.gx if det.gaze else None,
                    "gy": det.gaze.gy if det.gaze else None,
                })
            tracks.append({"track_id": track.track_id, "samples": samples})
        return {"tracks": tracks}


def vision_stage(session: SessionData, layout: ClassroomLayout,
                 cfg: ServiceConfig) -> VisionResult:
    """Tracking, posture labels, attention regions, heatmap, dead zones."""
    tracks = assign_tracks(session, cfg.tracking)
    frame_times = {fr.index: fr.t_ms for fr in session.frames}

    labels: dict[tuple[int, int], PostureLabel] = {}
    regions: dict[tuple[int, int], str] = {}
    gaze_samples: list[GazeTarget] = []
    for track in tracks:
        for fi in track.frame_indices():
            det = track.detections[fi]
            labels[(track.track_id, fi)] = classify_posture(det, cfg.posture)
            if det.gaze is not None:
                regions[(track.track_id, fi)] = classify_attention(det.gaze, layout)
                gaze_samples.append(det.gaze)

    window = (0, session.frames[-1].t_ms + 1) if session.frames else (0, 0)
    heatmap = accumulate_heatmap(gaze_samples, cfg.grid_w, cfg.grid_h, window)

    if layout.find("seating") is not None:
        dead = dead_zone_report(heatmap, layout, cfg.min_coverage).to_json_dict()
    else:
        dead = {"available": False}

    return VisionResult(tracks=tracks, labels=labels, regions=regions,
                        heatmap=heatmap, dead_zones=dead,
                        frame_times=frame_times)


@dataclass
class AnalysisResult:
    chunks: list[ChunkAnalysis]
    syntheses: list[SynthesisReport]
    final: FinalReport


def analysis_stage(session: SessionData, vision: VisionResult,
                   client: AnalyzerClient, budget: TokenBudget,
                   on_micro=None, on_synthesis=None, on_final=None) -> AnalysisResult:
    """Run the micro/synthesis/final hierarchy through an analyzer client.

    A micro response that still fails to parse after retries degrades that
    one chunk (empty analysis, degraded flag); failed aggregate stages fall
    back to the local deterministic reduction over the member artifacts.
    """
    payloads = segment_micro_chunks(session, vision.tracks, vision.labels,
                                    vision.regions)
    analyses: list[ChunkAnalysis] = []
    for i, payload in enumerate(payloads):
        if on_micro:
            on_micro(i, len(payloads))
        request = build_prompt(Stage.MICRO, payload, budget)
        response = run_analyzer(client, request,
                                valid_frames=set(payload.frame_indices()))
        if response.parse_ok:
            analyses.append(response.parsed)
        else:
            analyses.append(ChunkAnalysis(
                chunk_index=payload.chunk_index,
                frame_range=tuple(payload.frame_range()),
                tracks=(),
                degraded=True,
            ))

    groups = group_for_synthesis(analyses)
    syntheses: list[SynthesisReport] = []
    for g, group in enumerate(groups):
        if on_synthesis:
            on_synthesis(g, len(groups))
        request = build_prompt(Stage.SYNTHESIS,
                               SynthesisPayload(g, tuple(group)), budget)
        response = run_analyzer(client, request)
        if response.parse_ok:
            syntheses.append(response.parsed)
        else:
            syntheses.append(reduce_synthesis(g, group))

    if on_final:
        on_final()
    payload = FinalPayload(session.session_id, tuple(syntheses),
                           vision.dead_zones)
    request = build_prompt(Stage.FINAL, payload, budget)
    response = run_analyzer(client, request)
    if response.parse_ok:
        final = response.parsed
    else:
        final = reduce_final(session.session_id, syntheses, vision.dead_zones)

    return AnalysisResult(chunks=analyses, syntheses=syntheses, final=final)
