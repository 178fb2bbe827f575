import random
import threading
import time

import pytest

from classpulse.config import ServiceConfig
from classpulse.errors import (
    BudgetExceededError, NotFoundError, RetentionViolation,
)
from classpulse.jobs import (
    LLM_GB, VISION_GB, VISION_RESIDUAL_GB, MemoryLedger, Orchestrator,
    RUNNING_STATES, STATE_COMPLETE, STATE_FAILED, STATE_QUEUED,
    TERMINAL_STATES,
)
from classpulse.model import default_classroom_layout, serialize_session
from classpulse.storage import FileStore
from classpulse.synthetic import SyntheticConfig, generate_synthetic_session
from classpulse.model import parse_session


@pytest.fixture
def store(tmp_path):
    return FileStore(tmp_path / "data")


def seed_store(store, duration_s=60.0, n_students=1, dirty_frame=None):
    session, _ = generate_synthetic_session(SyntheticConfig(
        n_students=n_students, duration_s=duration_s, seed=1))
    if dirty_frame is not None:
        import dataclasses
        frames = list(session.frames)
        frames[dirty_frame] = dataclasses.replace(frames[dirty_frame],
                                                  source_deleted=False)
        session = dataclasses.replace(session, frames=tuple(frames))
        # bypass the parse-level gate the API applies; storage just records
    session_id, _ = store.save_session(session)
    layout_id = store.save_layout(default_classroom_layout())
    return session_id, layout_id


class TestLedger:
    def test_vision_acquire(self):
        ledger = MemoryLedger()
        ledger.acquire("vision", VISION_GB)
        assert ledger.total_active() == 6.0

    def test_release_leaves_residual(self):
        ledger = MemoryLedger()
        ledger.acquire("vision", VISION_GB)
        ledger.release("vision", VISION_RESIDUAL_GB)
        assert ledger.total_active() == pytest.approx(0.01)

    def test_llm_after_release_fits(self):
        ledger = MemoryLedger()
        ledger.acquire("vision", VISION_GB)
        ledger.release("vision", VISION_RESIDUAL_GB)
        ledger.acquire("llm", LLM_GB)
        assert ledger.total_active() == pytest.approx(43.01)

    def test_llm_before_release_exceeds_budget(self):
        ledger = MemoryLedger()
        ledger.acquire("vision", VISION_GB)
        with pytest.raises(BudgetExceededError):
            ledger.acquire("llm", LLM_GB)  # 49.0 > 48.0

    def test_release_all(self):
        ledger = MemoryLedger()
        ledger.acquire("vision", VISION_GB)
        ledger.release("vision", VISION_RESIDUAL_GB)
        ledger.release_all()
        assert ledger.total_active() == 0.0

    def test_event_recording(self):
        events = []
        ledger = MemoryLedger(on_event=events.append)
        ledger.acquire("vision", VISION_GB)
        ledger.release("vision", VISION_RESIDUAL_GB)
        assert [e["op"] for e in events] == ["acquire", "release"]
        assert events[0]["total_active"] == 6.0
        assert events[1]["total_active"] == pytest.approx(0.01)


class TestSubmit:
    def test_valid_submission_queued(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store)
        job_id = orch.submit(session_id, layout_id)
        assert orch.get_job(job_id).state == STATE_QUEUED

    def test_unknown_session(self, store):
        orch = Orchestrator(store)
        _, layout_id = seed_store(store)
        with pytest.raises(NotFoundError):
            orch.submit("s-nope", layout_id)

    def test_retention_violation_never_enqueued(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store, dirty_frame=3)
        with pytest.raises(RetentionViolation) as exc:
            orch.submit(session_id, layout_id)
        assert exc.value.offending_indices == [3]
        assert orch.run_next() is None

    def test_fifo_order(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store, duration_s=5)
        ids = [orch.submit(session_id, layout_id) for _ in range(3)]
        executed = orch.run_pending()
        assert executed == ids


class TestRunNext:
    def test_full_job_completes(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store, duration_s=300)
        job_id = orch.submit(session_id, layout_id)
        orch.run_next()
        job = orch.get_job(job_id)
        assert job.state == STATE_COMPLETE
        assert job.progress == 1.0
        assert store.has_artifact(job_id, "final_report.json")
        assert len(store.list_artifacts(job_id, "chunks")) == 5
        assert len(store.list_artifacts(job_id, "syntheses")) == 1

    def test_ledger_choreography_in_event_log(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store)
        job_id = orch.submit(session_id, layout_id)
        orch.run_next()
        events = store.read_ledger_events(job_id)
        ops = [(e["op"], e["stage"]) for e in events]
        assert ops[:3] == [("acquire", "vision"), ("release", "vision"),
                           ("acquire", "llm")]
        assert max(e["total_active"] for e in events) == pytest.approx(43.01)
        assert events[-1]["op"] == "release_all"
        assert events[-1]["total_active"] == 0.0

    def test_progress_monotone(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store, duration_s=300)
        job_id = orch.submit(session_id, layout_id)
        orch.run_next()
        events = store.read_events(job_id)
        fractions = [e["fraction"] for e in events]
        assert fractions == sorted(fractions)
        assert fractions[-1] == 1.0

    def test_stage_failure_releases_ledger_and_advances(self, store):
        calls = {"n": 0}

        def hook(stage):
            calls["n"] += 1
            if stage == "micro" and calls["n"] == 3:
                raise RuntimeError("injected fault")

        orch = Orchestrator(store, stage_hook=hook)
        session_id, layout_id = seed_store(store, duration_s=300)
        first = orch.submit(session_id, layout_id)
        second = orch.submit(session_id, layout_id)
        orch.run_pending()

        failed = orch.get_job(first)
        assert failed.state == STATE_FAILED
        assert "injected fault" in failed.reason
        ledger_events = store.read_ledger_events(first)
        assert ledger_events[-1]["op"] == "release_all"
        assert ledger_events[-1]["total_active"] == 0.0
        assert orch.get_job(second).state == STATE_COMPLETE

    def test_empty_session_fails_cleanly(self, store):
        import json
        # hand-write a frame-less session
        doc = {"session_id": "s-x", "frame_width": 10, "frame_height": 10,
               "sample_hz": 1.0, "frames": []}
        session = parse_session(json.dumps(doc).encode())
        session_id, _ = store.save_session(session)
        layout_id = store.save_layout(default_classroom_layout())
        orch = Orchestrator(store)
        job_id = orch.submit(session_id, layout_id)
        orch.run_next()
        job = orch.get_job(job_id)
        assert job.state == STATE_FAILED
        assert "no content" in job.reason


class TestEta:
    def test_complete_job_zero(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store, duration_s=5)
        job_id = orch.submit(session_id, layout_id)
        orch.run_next()
        assert orch.eta(job_id) == 0.0

    def test_ema_converges_on_constant_durations(self, store):
        orch = Orchestrator(store)
        # Feed constant 2.0s micro durations directly into the EMA.
        for _ in range(60):
            orch._observe("micro", 2.0)
        assert orch._estimate("micro") == pytest.approx(2.0)
        # 30 micro stages remaining -> 60s plus synthesis/final estimates.
        from classpulse.jobs import Job, STATE_RUNNING_MICRO
        job = Job(job_id="j", session_id="s", layout_id="l",
                  state=STATE_RUNNING_MICRO, stage_index=30, stage_total=60,
                  n_micro=60, n_synthesis=12)
        with orch._lock:
            eta = orch._eta_locked(job)
        expected = 60.0 + 12 * orch._estimate("synthesis") + orch._estimate("final")
        assert eta == pytest.approx(expected)

    def test_queued_uses_priors(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store, duration_s=300)
        job_id = orch.submit(session_id, layout_id)
        priors = orch.cfg.stage_priors
        expected = (priors["vision"] + 5 * priors["micro"]
                    + 1 * priors["synthesis"] + priors["final"])
        assert orch.eta(job_id) == pytest.approx(expected, abs=1e-6)


class TestMutualExclusion:
    def audit(self, store, job_ids):
        intervals = []
        for job_id in job_ids:
            events = store.read_events(job_id)
            running = [e["seq"] for e in events if e["state"] in RUNNING_STATES]
            terminal = [e["seq"] for e in events if e["state"] in TERMINAL_STATES]
            assert terminal, f"{job_id} never terminated"
            if running:
                intervals.append((min(running), terminal[-1]))
        intervals.sort()
        for (s1, e1), (s2, e2) in zip(intervals, intervals[1:]):
            assert e1 < s2, "two jobs were running concurrently"

    def test_concurrent_submissions_serialized(self, store):
        rng = random.Random(0)
        orch = Orchestrator(
            store,
            stage_hook=lambda s: time.sleep(rng.random() * 0.002))
        session_id, layout_id = seed_store(store, duration_s=5)

        job_ids = []
        lock = threading.Lock()

        def submit():
            jid = orch.submit(session_id, layout_id)
            with lock:
                job_ids.append(jid)

        threads = [threading.Thread(target=submit) for _ in range(12)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        # several competing drivers; run_next serializes them
        drivers = [threading.Thread(target=orch.run_pending) for _ in range(3)]
        for d in drivers:
            d.start()
        for d in drivers:
            d.join()

        assert len(job_ids) == 12
        for jid in job_ids:
            assert orch.get_job(jid).state in TERMINAL_STATES
        self.audit(store, job_ids)


class TestCrashRecovery:
    def test_running_jobs_reset_to_queued(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store, duration_s=5)
        job_id = orch.submit(session_id, layout_id)

        # Simulate a crash: persist a running snapshot and abandon it.
        job = orch.get_job(job_id)
        job.state = "running_micro"
        job.stage_index, job.stage_total = 2, 5
        job.progress = 0.4
        store.save_job(job.to_json_dict())

        revived = Orchestrator(store)
        recovered = revived.get_job(job_id)
        assert recovered.state == STATE_QUEUED
        assert recovered.progress == 0.4  # kept, so the log stays monotone

        revived.run_pending()
        assert revived.get_job(job_id).state == STATE_COMPLETE
        events = store.read_events(job_id)
        fractions = [e["fraction"] for e in events]
        assert fractions == sorted(fractions)

    def test_completed_jobs_untouched(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store, duration_s=5)
        job_id = orch.submit(session_id, layout_id)
        orch.run_next()

        revived = Orchestrator(store)
        assert revived.get_job(job_id).state == STATE_COMPLETE
        assert revived.run_next() is None


class TestSubscribers:
    def test_events_streamed_in_order(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store, duration_s=120)
        job_id = orch.submit(session_id, layout_id)
        sub = orch.subscribe(job_id)
        orch.run_next()

        states = []
        while True:
            event = sub.get(orch.latest_event(job_id), timeout=0.05)
            if event is None:
                break
            states.append(event.state)
            if event.state in TERMINAL_STATES:
                break
        assert states[0] == STATE_QUEUED  # replay of the snapshot
        assert states[-1] == STATE_COMPLETE

    def test_subscribe_unknown_job(self, store):
        orch = Orchestrator(store)
        with pytest.raises(NotFoundError):
            orch.subscribe("j-nope")

    def test_late_subscriber_gets_snapshot(self, store):
        orch = Orchestrator(store)
        session_id, layout_id = seed_store(store, duration_s=5)
        job_id = orch.submit(session_id, layout_id)
        orch.run_next()
        sub = orch.subscribe(job_id)
        event = sub.get(orch.latest_event(job_id), timeout=0.05)
        assert event.state == STATE_COMPLETE
        assert event.fraction == 1.0
