"""Queued, serialized pipeline execution with a stage-aware memory ledger.

One worker executes jobs strictly FIFO, one at a time; at no instant are two
jobs in running states. The ledger models accelerator memory as an enforced
invariant: the vision stages hold 6 GB, release down to a 0.01 GB residual,
and only then may the 43 GB analyzer allocation proceed. Stage outputs are
keyed by job+stage and overwritten, so recovery can replay a stage safely;
jobs found running after a restart are reset to queued.
"""

from __future__ import annotations

import itertools
import queue
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .config import ServiceConfig
from .engine import PROFILES, HttpAnalyzerClient, RuleBasedAnalyzer
from .errors import (
    BudgetExceededError, ConfigError, EmptySessionError, NotFoundError,
    RetentionViolation,
)
from .pipeline import plan_stages
from .runner import analysis_stage, vision_stage
from .storage import FileStore

VISION_GB = 6.0
VISION_RESIDUAL_GB = 0.01
LLM_GB = 43.0

STATE_QUEUED = "queued"
STATE_RUNNING_VISION = "running_vision"
STATE_RUNNING_MICRO = "running_micro"
STATE_RUNNING_SYNTHESIS = "running_synthesis"
STATE_RUNNING_FINAL = "running_final"
STATE_COMPLETE = "complete"
STATE_FAILED = "failed"

RUNNING_STATES = {
    STATE_RUNNING_VISION, STATE_RUNNING_MICRO,
    STATE_RUNNING_SYNTHESIS, STATE_RUNNING_FINAL,
}
TERMINAL_STATES = {STATE_COMPLETE, STATE_FAILED}

_STATE_RANK = {
    STATE_QUEUED: 0,
    STATE_RUNNING_VISION: 1,
    STATE_RUNNING_MICRO: 2,
    STATE_RUNNING_SYNTHESIS: 3,
    STATE_RUNNING_FINAL: 4,
    STATE_COMPLETE: 5,
    STATE_FAILED: 5,
}

# Progress weight of each phase; fractions are clamped non-decreasing.
_P_VISION, _P_MICRO, _P_SYNTH, _P_FINAL = 0.10, 0.60, 0.20, 0.10


@dataclass
class Job:
    job_id: str
    session_id: str
    layout_id: str
    state: str = STATE_QUEUED
    stage_index: int | None = None
    stage_total: int | None = None
    reason: str | None = None
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)
    progress: float = 0.0
    n_micro: int | None = None
    n_synthesis: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "session_id": self.session_id,
            "layout_id": self.layout_id,
            "state": self.state,
            "stage_index": self.stage_index,
            "stage_total": self.stage_total,
            "reason": self.reason,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "progress": self.progress,
            "n_micro": self.n_micro,
            "n_synthesis": self.n_synthesis,
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "Job":
        return Job(**{k: doc.get(k) for k in (
            "job_id", "session_id", "layout_id", "state", "stage_index",
            "stage_total", "reason", "created_at", "updated_at", "progress",
            "n_micro", "n_synthesis",
        )})


@dataclass(frozen=True)
class ProgressEvent:
    job_id: str
    state: str
    fraction: float
    eta_s: float
    t: float
    seq: int
    stage_index: int | None = None
    stage_total: int | None = None
    reason: str | None = None

    def to_json_dict(self) -> dict:
        doc = {
            "job_id": self.job_id,
            "state": self.state,
            "fraction": self.fraction,
            "eta_s": self.eta_s,
            "t": self.t,
            "seq": self.seq,
            "stage_index": self.stage_index,
            "stage_total": self.stage_total,
        }
        if self.reason is not None:
            doc["reason"] = self.reason
        return doc


class MemoryLedger:
    """Accelerator-memory accounting: active allocations plus the residuals
    releases leave behind must never exceed the budget."""

    def __init__(self, budget_gb: float = 48.0, on_event=None):
        self.budget_gb = budget_gb
        self.allocations: dict[str, float] = {}
        self.residuals: dict[str, float] = {}
        self._on_event = on_event

    def total_active(self) -> float:
        return sum(self.allocations.values()) + sum(self.residuals.values())

    def _emit(self, op: str, stage: str, gb: float) -> None:
        if self._on_event:
            self._on_event({
                "op": op, "stage": stage, "gb": gb,
                "total_active": round(self.total_active(), 6),
                "t": time.time(),
            })

    def acquire(self, stage: str, gb: float) -> None:
        if self.total_active() + gb > self.budget_gb + 1e-9:
            raise BudgetExceededError(
                f"acquiring {gb} GB for {stage} would put the ledger at "
                f"{self.total_active() + gb:.2f} GB, over the "
                f"{self.budget_gb} GB budget"
            )
        self.residuals.pop(stage, None)
        self.allocations[stage] = self.allocations.get(stage, 0.0) + gb
        self._emit("acquire", stage, gb)

    def release(self, stage: str, residual_gb: float = 0.0) -> None:
        self.allocations.pop(stage, None)
        if residual_gb > 0:
            self.residuals[stage] = residual_gb
        else:
            self.residuals.pop(stage, None)
        self._emit("release", stage, residual_gb)

    def release_all(self) -> None:
        self.allocations.clear()
        self.residuals.clear()
        self._emit("release_all", "*", 0.0)


class _Subscriber:
    """Bounded per-subscriber buffer; overflow drops to a resync snapshot
    instead of ever blocking the worker."""

    def __init__(self, maxsize: int = 256):
        self._q: queue.Queue = queue.Queue(maxsize=maxsize)
        self._resync = threading.Event()

    def push(self, event: ProgressEvent) -> None:
        try:
            self._q.put_nowait(event)
        except queue.Full:
            self._resync.set()

    def get(self, latest: ProgressEvent | None, timeout: float = 0.25):
        if self._resync.is_set():
            self._resync.clear()
            while not self._q.empty():
                try:
                    self._q.get_nowait()
                except queue.Empty:
                    break
            if latest is not None:
                return latest
        try:
            return self._q.get(timeout=timeout)
        except queue.Empty:
            return None


class Orchestrator:
    """Single-worker FIFO job queue over a FileStore.

    Many threads may submit concurrently; exactly one job executes at a
    time (run_next holds the worker lock end-to-end). Restart recovery
    resets any job found in a running state back to queued.
    """

    def __init__(self, store: FileStore, cfg: ServiceConfig | None = None,
                 analyzer=None, stage_hook=None):
        self.store = store
        self.cfg = cfg or ServiceConfig()
        if analyzer is not None:
            self.analyzer = analyzer
        elif self.cfg.analyzer_mode == "http":
            self.analyzer = HttpAnalyzerClient(self.cfg.analyzer_base_url,
                                               self.cfg.analyzer_timeout_s)
        else:
            self.analyzer = RuleBasedAnalyzer()
        if self.cfg.analyzer_profile not in PROFILES:
            raise ConfigError(
                f"unknown analyzer profile {self.cfg.analyzer_profile!r}"
            )
        self.budget = PROFILES[self.cfg.analyzer_profile]
        self._stage_hook = stage_hook

        self._lock = threading.Lock()
        self._worker_lock = threading.Lock()
        self._queue: deque[str] = deque()
        self._jobs: dict[str, Job] = {}
        self._latest: dict[str, ProgressEvent] = {}
        self._subscribers: dict[str, list[_Subscriber]] = {}
        self._seq = itertools.count()
        self._ema: dict[str, float] = {}
        self._ema_alpha = 0.3
        self._queue_cv = threading.Condition(self._lock)
        self._worker_thread: threading.Thread | None = None
        self._stop = threading.Event()

        self._recover()

    # -- recovery ---------------------------------------------------------

    def _recover(self) -> None:
        pending = []
        max_seq = -1
        for doc in self.store.list_jobs():
            job = Job.from_json_dict(doc)
            was_running = job.state in RUNNING_STATES
            if was_running:
                # Crash mid-run: stages are idempotent, so replay from the top.
                # Progress is kept so the event log stays monotone per job.
                job.state = STATE_QUEUED
                job.stage_index = job.stage_total = None
                job.updated_at = time.time()
                self.store.save_job(job.to_json_dict())
            self._jobs[job.job_id] = job
            events = self.store.read_events(job.job_id)
            if events:
                max_seq = max(max_seq, events[-1].get("seq", -1))
                if not was_running:
                    last = events[-1]
                    self._latest[job.job_id] = ProgressEvent(
                        job_id=job.job_id, state=last["state"],
                        fraction=last["fraction"], eta_s=last["eta_s"],
                        t=last["t"], seq=last["seq"],
                        stage_index=last.get("stage_index"),
                        stage_total=last.get("stage_total"),
                        reason=last.get("reason"),
                    )
            if job.state == STATE_QUEUED:
                pending.append(job)
        self._seq = itertools.count(max_seq + 1)
        pending.sort(key=lambda j: (j.created_at, j.job_id))
        for job in pending:
            self._queue.append(job.job_id)
            with self._lock:
                self._publish_locked(job)

    # -- submission -------------------------------------------------------

    def submit(self, session_id: str, layout_id: str) -> str:
        """Enqueue a job; rejects unknown ids and retention violations."""
        if not self.store.has_session(session_id):
            raise NotFoundError(f"session {session_id} not found")
        if not self.store.has_layout(layout_id):
            raise NotFoundError(f"layout {layout_id} not found")
        retention = self.store.load_retention(session_id)
        if retention["offending_indices"]:
            raise RetentionViolation(
                f"session {session_id} retains source frames "
                f"{retention['offending_indices']}",
                offending_indices=list(retention["offending_indices"]),
            )

        job = Job(job_id=self.store.new_job_id(), session_id=session_id,
                  layout_id=layout_id)
        try:
            session = self.store.load_session(session_id)
            plan = plan_stages(session.duration_s())
            job.n_micro, job.n_synthesis = plan.n_micro, plan.n_synthesis
        except EmptySessionError:
            pass  # surfaces as a Failed job at execution time

        with self._lock:
            self._jobs[job.job_id] = job
            self._queue.append(job.job_id)
            self.store.save_job(job.to_json_dict())
            self._publish_locked(job)
            self._queue_cv.notify()
        return job.job_id

    # -- events -----------------------------------------------------------

    def _publish_locked(self, job: Job) -> None:
        event = ProgressEvent(
            job_id=job.job_id,
            state=job.state,
            fraction=job.progress,
            eta_s=round(self._eta_locked(job), 3),
            t=time.time(),
            seq=next(self._seq),
            stage_index=job.stage_index,
            stage_total=job.stage_total,
            reason=job.reason,
        )
        self._latest[job.job_id] = event
        self.store.append_event(job.job_id, event.to_json_dict())
        for sub in self._subscribers.get(job.job_id, []):
            sub.push(event)

    def _set_state(self, job: Job, state: str, fraction: float,
                   stage_index: int | None = None,
                   stage_total: int | None = None,
                   reason: str | None = None) -> None:
        with self._lock:
            job.state = state
            job.stage_index = stage_index
            job.stage_total = stage_total
            job.reason = reason
            job.updated_at = time.time()
            job.progress = max(job.progress, min(1.0, fraction))
            self.store.save_job(job.to_json_dict())
            self._publish_locked(job)

    def subscribe(self, job_id: str) -> _Subscriber:
        with self._lock:
            if job_id not in self._jobs:
                raise NotFoundError(f"job {job_id} not found")
            sub = _Subscriber()
            self._subscribers.setdefault(job_id, []).append(sub)
            latest = self._latest.get(job_id)
            if latest is not None:
                sub.push(latest)  # late subscribers see current state first
            return sub

    def unsubscribe(self, job_id: str, sub: _Subscriber) -> None:
        with self._lock:
            subs = self._subscribers.get(job_id, [])
            if sub in subs:
                subs.remove(sub)

    def latest_event(self, job_id: str) -> ProgressEvent | None:
        with self._lock:
            return self._latest.get(job_id)

    def get_job(self, job_id: str) -> Job:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"job {job_id} not found")
        return job

    def job_status(self, job_id: str) -> dict:
        job = self.get_job(job_id)
        doc = job.to_json_dict()
        with self._lock:
            doc["eta_s"] = round(self._eta_locked(job), 3)
        return doc

    # -- ETA ---------------------------------------------------------------

    def _estimate(self, stage_type: str) -> float:
        return self._ema.get(stage_type, self.cfg.stage_priors[stage_type])

    def _observe(self, stage_type: str, duration_s: float) -> None:
        with self._lock:
            prev = self._ema.get(stage_type)
            if prev is None:
                self._ema[stage_type] = duration_s
            else:
                a = self._ema_alpha
                self._ema[stage_type] = a * duration_s + (1 - a) * prev

    def _eta_locked(self, job: Job) -> float:
        if job.state in TERMINAL_STATES:
            return 0.0
        n_micro = job.n_micro or 0
        n_synth = job.n_synthesis or 0
        remaining = 0.0
        rank = _STATE_RANK[job.state]
        if rank <= 1:
            remaining += self._estimate("vision")
        if rank <= 2:
            done = job.stage_index if job.state == STATE_RUNNING_MICRO else 0
            remaining += (n_micro - (done or 0)) * self._estimate("micro")
        if rank <= 3:
            done = job.stage_index if job.state == STATE_RUNNING_SYNTHESIS else 0
            remaining += (n_synth - (done or 0)) * self._estimate("synthesis")
        remaining += self._estimate("final")
        return max(0.0, remaining)

    def eta(self, job_id: str) -> float:
        job = self.get_job(job_id)
        with self._lock:
            return self._eta_locked(job)

    # -- execution ----------------------------------------------------------

    def _hook(self, stage_type: str) -> None:
        if self._stage_hook:
            self._stage_hook(stage_type)

    def run_next(self) -> str | None:
        """Execute exactly one queued job end-to-end; returns its id."""
        with self._worker_lock:
            with self._lock:
                if not self._queue:
                    return None
                job = self._jobs[self._queue.popleft()]

            ledger = MemoryLedger(
                budget_gb=self.cfg.memory_budget_gb,
                on_event=lambda doc: self.store.append_ledger_event(
                    job.job_id, doc),
            )
            try:
                self._run_job(job, ledger)
            except Exception as e:  # noqa: BLE001 - one job must never kill the worker
                ledger.release_all()
                self._set_state(job, STATE_FAILED, job.progress,
                                reason=f"{type(e).__name__}: {e}")
            return job.job_id

    def _run_job(self, job: Job, ledger: MemoryLedger) -> None:
        self._set_state(job, STATE_RUNNING_VISION, 0.0)
        t0 = time.perf_counter()
        ledger.acquire("vision", VISION_GB)
        self._hook("vision")

        session = self.store.load_session(job.session_id)
        layout = self.store.load_layout(job.layout_id)
        plan = plan_stages(session.duration_s())  # raises on empty sessions
        job.n_micro, job.n_synthesis = plan.n_micro, plan.n_synthesis

        vision = vision_stage(session, layout, self.cfg)
        self.store.save_artifact(job.job_id, "timeline.json",
                                 vision.timeline_json())
        self.store.save_artifact(job.job_id, "heatmap.json",
                                 vision.heatmap.to_json_dict())
        self.store.save_artifact(job.job_id, "dead_zones.json",
                                 vision.dead_zones)

        # The vision models are torn down before the analyzer loads; only a
        # cache residual stays behind.
        ledger.release("vision", VISION_RESIDUAL_GB)
        self._observe("vision", time.perf_counter() - t0)

        ledger.acquire("llm", LLM_GB)

        timers = {"t": time.perf_counter()}

        def on_micro(i: int, n: int) -> None:
            if i > 0:
                self._observe_pending("micro", timers)
            self._set_state(job, STATE_RUNNING_MICRO,
                            _P_VISION + _P_MICRO * (i / n),
                            stage_index=i, stage_total=n)
            self._hook("micro")
            timers["t"] = time.perf_counter()

        def on_synthesis(g: int, n: int) -> None:
            self._observe_pending("micro" if g == 0 else "synthesis", timers)
            self._set_state(job, STATE_RUNNING_SYNTHESIS,
                            _P_VISION + _P_MICRO + _P_SYNTH * (g / n),
                            stage_index=g, stage_total=n)
            self._hook("synthesis")
            timers["t"] = time.perf_counter()

        def on_final() -> None:
            self._observe_pending("synthesis", timers)
            self._set_state(job, STATE_RUNNING_FINAL,
                            _P_VISION + _P_MICRO + _P_SYNTH)
            self._hook("final")
            timers["t"] = time.perf_counter()

        result = analysis_stage(session, vision, self.analyzer, self.budget,
                                on_micro=on_micro, on_synthesis=on_synthesis,
                                on_final=on_final)
        self._observe_pending("final", timers)

        for analysis in result.chunks:
            self.store.save_artifact(
                job.job_id, f"chunks/chunk_{analysis.chunk_index:04d}.json",
                analysis.to_json_dict())
        for synth in result.syntheses:
            self.store.save_artifact(
                job.job_id, f"syntheses/synthesis_{synth.group_index:04d}.json",
                synth.to_json_dict())
        self.store.save_artifact(job.job_id, "final_report.json",
                                 result.final.to_json_dict())

        ledger.release("llm", 0.0)
        ledger.release_all()
        self._set_state(job, STATE_COMPLETE, 1.0)

    def _observe_pending(self, stage_type: str, timers: dict) -> None:
        self._observe(stage_type, time.perf_counter() - timers["t"])

    def run_pending(self) -> list[str]:
        """Drain the queue synchronously; returns the executed job ids."""
        done = []
        while True:
            job_id = self.run_next()
            if job_id is None:
                return done
            done.append(job_id)

    # -- background worker --------------------------------------------------

    def start_worker(self) -> None:
        if self._worker_thread is not None:
            return
        self._stop.clear()

        def loop() -> None:
            while not self._stop.is_set():
                if self.run_next() is None:
                    with self._queue_cv:
                        self._queue_cv.wait(timeout=0.2)

        self._worker_thread = threading.Thread(target=loop, daemon=True,
                                               name="classpulse-worker")
        self._worker_thread.start()

    def stop_worker(self) -> None:
        self._stop.set()
        with self._queue_cv:
            self._queue_cv.notify_all()
        if self._worker_thread is not None:
            self._worker_thread.join(timeout=5.0)
            self._worker_thread = None
