import math
import random

import pytest

from classpulse.errors import EmptySessionError
from classpulse.model import default_classroom_layout
from classpulse.pipeline import (
    ChunkAnalysis, ChunkPayload, ChunkSample, TrackSamples,
    group_for_synthesis, plan_stages, reduce_chunk, reduce_final,
    reduce_synthesis, segment_micro_chunks,
)
from classpulse.posture import PostureLabel, classify_posture
from classpulse.runner import vision_stage
from classpulse.config import ServiceConfig
from classpulse.synthetic import SyntheticConfig, generate_synthetic_session
from classpulse.tracking import assign_tracks
from conftest import make_person, make_session


def payload_from(labels_regions, chunk_index=0, t0=0):
    """Single-track payload: list of (posture, region) per frame."""
    samples = tuple(
        ChunkSample(frame=i, t_ms=t0 + i * 5000, keypoints=((0.0, 0.0, 0.0),) * 25,
                    gaze=(0.5, 0.5), posture=posture, region=region)
        for i, (posture, region) in enumerate(labels_regions)
    )
    return ChunkPayload(chunk_index=chunk_index, t_start_ms=t0,
                        t_end_ms=t0 + 60000,
                        tracks=(TrackSamples(track_id=0, samples=samples),))


class TestPlanStages:
    def test_one_hour(self):
        plan = plan_stages(3600)
        assert (plan.n_micro, plan.n_synthesis, plan.n_final) == (60, 12, 1)

    def test_five_minutes(self):
        plan = plan_stages(300)
        assert (plan.n_micro, plan.n_synthesis, plan.n_final) == (5, 1, 1)

    def test_sixty_one_seconds(self):
        plan = plan_stages(61)
        assert (plan.n_micro, plan.n_synthesis, plan.n_final) == (2, 1, 1)

    def test_empty_session_rejected(self):
        with pytest.raises(EmptySessionError):
            plan_stages(0)


def _annotate(session, tracks):
    labels, regions = {}, {}
    for t in tracks:
        for fi in t.frame_indices():
            labels[(t.track_id, fi)] = classify_posture(t.detections[fi])
            regions[(t.track_id, fi)] = "board"
    return labels, regions


class TestSegmentation:
    def test_one_hour_at_point_two_hz(self):
        session, _ = generate_synthetic_session(
            SyntheticConfig(n_students=1, duration_s=3600, seed=1))
        tracks = assign_tracks(session)
        labels, regions = _annotate(session, tracks)
        payloads = segment_micro_chunks(session, tracks, labels, regions)
        assert len(payloads) == 60
        assert all(p.n_frames() == 12 for p in payloads)

    def test_ninety_seconds_splits_12_and_6(self):
        session, _ = generate_synthetic_session(
            SyntheticConfig(n_students=1, duration_s=90, seed=1))
        tracks = assign_tracks(session)
        labels, regions = _annotate(session, tracks)
        payloads = segment_micro_chunks(session, tracks, labels, regions)
        assert [p.n_frames() for p in payloads] == [12, 6]

    def test_single_frame(self):
        session = make_session([(0, [make_person()])])
        tracks = assign_tracks(session)
        labels, regions = _annotate(session, tracks)
        payloads = segment_micro_chunks(session, tracks, labels, regions)
        assert len(payloads) == 1
        assert payloads[0].n_frames() == 1

    def test_partition_and_plan_consistency(self):
        rng = random.Random(17)
        for _ in range(25):
            hz = rng.choice([0.1, 0.2, 0.5, 1.0])
            duration = rng.uniform(1, 400)
            session, _ = generate_synthetic_session(SyntheticConfig(
                n_students=rng.randint(1, 3), duration_s=duration,
                sample_hz=hz, seed=rng.randint(0, 999)))
            tracks = assign_tracks(session)
            labels, regions = _annotate(session, tracks)
            payloads = segment_micro_chunks(session, tracks, labels, regions)

            plan = plan_stages(session.duration_s())
            assert len(payloads) == plan.n_micro

            # partition: every frame in exactly one chunk, windows respected
            assert sum(p.n_frames() for p in payloads) == len(session.frames)
            for p in payloads:
                for tr in p.tracks:
                    for s in tr.samples:
                        assert p.t_start_ms <= s.t_ms < p.t_end_ms


class TestGrouping:
    def _analyses(self, n):
        return [ChunkAnalysis(chunk_index=i, frame_range=(), tracks=())
                for i in range(n)]

    def test_sixty_gives_twelve_groups(self):
        groups = group_for_synthesis(self._analyses(60))
        assert len(groups) == 12
        assert all(len(g) == 5 for g in groups)

    def test_remainder(self):
        groups = group_for_synthesis(self._analyses(7))
        assert [len(g) for g in groups] == [5, 2]

    def test_single(self):
        assert [len(g) for g in group_for_synthesis(self._analyses(1))] == [1]


class TestReduceChunk:
    def test_full_engagement(self):
        payload = payload_from([("Upright", "board")] * 12)
        analysis = reduce_chunk(payload)
        assert analysis.tracks[0].engagement == 1.0
        assert analysis.tracks[0].dominant_posture == "Upright"
        assert analysis.tracks[0].citations == ()

    def test_zero_engagement(self):
        payload = payload_from([("Sleeping", "desk")] * 12)
        assert reduce_chunk(payload).tracks[0].engagement == 0.0

    def test_half_engagement(self):
        rows = [("Upright", "board")] * 6 + [("Sleeping", "desk")] * 6
        analysis = reduce_chunk(payload_from(rows))
        tr = analysis.tracks[0]
        assert tr.engagement == 0.5
        assert tr.citations == (6,)  # the single transition frame
        assert tr.transitions[0]["from"] == "Upright"
        assert tr.attention == {"board": 0.5, "desk": 0.5}

    def test_modal_tie_breaks_by_declaration_order(self):
        rows = [("Sleeping", "desk")] * 6 + [("Upright", "board")] * 6
        analysis = reduce_chunk(payload_from(rows))
        # 6-6 tie: Upright precedes Sleeping in the declaration order.
        assert analysis.tracks[0].dominant_posture == "Upright"

    def test_empty_payload(self):
        payload = ChunkPayload(chunk_index=0, t_start_ms=0, t_end_ms=60000,
                               tracks=())
        analysis = reduce_chunk(payload)
        assert analysis.tracks == ()
        assert analysis.frame_range == ()

    def test_deterministic(self):
        rng = random.Random(4)
        rows = [(rng.choice(["Upright", "Sleeping"]),
                 rng.choice(["board", "desk"])) for _ in range(40)]
        payload = payload_from(rows)
        assert reduce_chunk(payload) == reduce_chunk(payload)

    def test_citations_within_chunk_range(self):
        rng = random.Random(12)
        for _ in range(20):
            rows = [(rng.choice(["Upright", "Sleeping", "Slouching"]), "board")
                    for _ in range(rng.randint(1, 30))]
            analysis = reduce_chunk(payload_from(rows))
            assert analysis.citation_errors() == []


class TestSynthesisAndFinal:
    def _chunk(self, index, engagement_rows):
        return reduce_chunk(payload_from(engagement_rows, chunk_index=index,
                                         t0=index * 60000))

    def test_trend_rising(self):
        low = [("Sleeping", "desk")] * 12
        high = [("Upright", "board")] * 12
        analyses = [self._chunk(0, low), self._chunk(1, low),
                    self._chunk(2, high), self._chunk(3, high),
                    self._chunk(4, high)]
        synth = reduce_synthesis(0, analyses)
        assert synth.chunk_indices == (0, 1, 2, 3, 4)
        tr = synth.tracks[0]
        assert tr.trend == "rising"
        assert tr.mean_engagement == pytest.approx(0.6)
        assert len(synth.low_engagement) == 2  # the two sleeping chunks

    def test_final_report(self):
        low = [("Sleeping", "desk")] * 12
        high = [("Upright", "board")] * 12
        synths = [
            reduce_synthesis(0, [self._chunk(i, low) for i in range(5)]),
            reduce_synthesis(1, [self._chunk(i, high) for i in range(5, 10)]),
        ]
        final = reduce_final("s-x", synths, {"coverage": 0.5})
        assert final.session_id == "s-x"
        assert final.covered_groups == (0, 1)
        assert final.n_chunks == 10
        assert final.tracks[0]["trend"] == "rising"
        # five consecutive low chunks merge into one flagged period
        assert len(final.flagged_periods) == 1
        period = final.flagged_periods[0]
        assert (period["t_start_ms"], period["t_end_ms"]) == (0, 300000)
        assert "low engagement" in period["reason"]
        assert math.isclose(sum(final.attention.values()), 1.0)


class TestVisionIntegration:
    def test_histogram_matches_ground_truth(self):
        from classpulse.synthetic import ScriptInterval
        script = (
            (ScriptInterval(0, 60, PostureLabel.SLEEPING, "desk"),
             ScriptInterval(60, 120, PostureLabel.UPRIGHT, "board")),
        )
        session, truth = generate_synthetic_session(SyntheticConfig(
            n_students=1, duration_s=120, behavior_script=script, seed=2))
        vision = vision_stage(session, default_classroom_layout(),
                              ServiceConfig())
        from classpulse.posture import posture_histogram
        bins = posture_histogram(vision.tracks, vision.frame_times, bin_s=60)
        assert bins[0]["counts"]["Sleeping"] == 12
        assert bins[1]["counts"]["Upright"] == 12
