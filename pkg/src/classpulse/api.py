"""HTTP surface: uploads, job control, results, heatmaps, layouts, progress.

Every non-2xx response carries exactly one error object of the form
{"code", "message", "detail"}. No endpoint ever returns or stores image
data; uploads accept extracted-geometry JSON only, which is the privacy
boundary of the whole system.
"""

from __future__ import annotations

import asyncio
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .config import ServiceConfig
from .errors import (
    ClasspulseError, LayoutError, NotFoundError, OrderingError, RangeError,
    RetentionViolation, SchemaError, SessionParseError,
)
from .gaze import AttentionHeatmap, accumulate_heatmap
from .jobs import Orchestrator, STATE_COMPLETE, TERMINAL_STATES
from .model import GazeTarget, layout_from_json_dict, parse_session
from .posture import histogram_from_labels, histogram_to_json_dict
from .storage import FileStore


def api_error(code: str, message: str, detail=None) -> dict:
    doc = {"code": code, "message": message}
    if detail is not None:
        doc["detail"] = detail
    return doc


def _error_response(status: int, code: str, message: str, detail=None):
    return JSONResponse(status_code=status,
                        content=api_error(code, message, detail))


def create_app(cfg: ServiceConfig | None = None,
               store: FileStore | None = None,
               orchestrator: Orchestrator | None = None,
               run_worker: bool = True) -> FastAPI:
    cfg = cfg or ServiceConfig()
    store = store or FileStore(cfg.data_dir)
    orch = orchestrator or Orchestrator(store, cfg)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if run_worker:
            orch.start_worker()
        yield
        if run_worker:
            orch.stop_worker()

    app = FastAPI(title="classpulse", lifespan=lifespan)
    app.state.orchestrator = orch
    app.state.store = store
    app.state.cfg = cfg

    @app.exception_handler(ClasspulseError)
    async def on_domain_error(request: Request, exc: ClasspulseError):
        if isinstance(exc, NotFoundError):
            return _error_response(404, "not_found", str(exc))
        if isinstance(exc, RetentionViolation):
            return _error_response(422, "retention_violation", str(exc),
                                   detail={"offending_indices":
                                           exc.offending_indices})
        return _error_response(400, "bad_request", str(exc))

    # -- sessions ---------------------------------------------------------

    @app.post("/api/sessions", status_code=201)
    async def post_session(request: Request):
        body = await request.body()
        try:
            session = parse_session(body)
        except (SessionParseError, SchemaError, OrderingError, RangeError) as e:
            return _error_response(400, "schema_error", str(e))
        offending = [fr.index for fr in session.frames if not fr.source_deleted]
        if offending:
            # Never persisted: an undeleted source frame means identifiable
            # imagery may still exist upstream.
            return _error_response(
                422, "retention_violation",
                f"session retains source frames {offending}",
                detail={"offending_indices": offending},
            )
        session_id, report = store.save_session(session)
        return {"session_id": session_id, "retention": report.to_json_dict()}

    # -- layouts ----------------------------------------------------------

    @app.post("/api/layouts", status_code=201)
    async def post_layout(request: Request):
        import json as _json
        try:
            doc = _json.loads(await request.body())
            layout = layout_from_json_dict(doc)
        except (ValueError, LayoutError, SessionParseError) as e:
            return _error_response(400, "schema_error", str(e))
        layout_id = store.save_layout(layout)
        return {"layout_id": layout_id}

    @app.get("/api/layouts")
    async def list_layouts():
        return {"layouts": store.list_layouts()}

    @app.get("/api/layouts/{layout_id}")
    async def get_layout(layout_id: str):
        from .model import layout_to_json_dict
        return layout_to_json_dict(store.load_layout(layout_id))

    # -- jobs ---------------------------------------------------------------

    @app.post("/api/jobs", status_code=202)
    async def post_job(request: Request):
        import json as _json
        try:
            doc = _json.loads(await request.body())
        except ValueError as e:
            return _error_response(400, "schema_error", f"malformed JSON: {e}")
        session_id = doc.get("session_id")
        layout_id = doc.get("layout_id")
        if not session_id or not layout_id:
            return _error_response(400, "schema_error",
                                   "session_id and layout_id are required")
        job_id = orch.submit(session_id, layout_id)
        return {"job_id": job_id}

    @app.get("/api/jobs")
    async def list_jobs():
        return {"jobs": [orch.job_status(doc["job_id"])
                         for doc in store.list_jobs()]}

    @app.get("/api/jobs/{job_id}")
    async def get_job(job_id: str):
        return orch.job_status(job_id)

    @app.get("/api/jobs/{job_id}/results")
    async def get_results(job_id: str):
        job = orch.get_job(job_id)
        if job.state != STATE_COMPLETE:
            return _error_response(
                409, "not_ready",
                f"job {job_id} is {job.state}; results need state complete",
            )
        final = store.load_artifact(job_id, "final_report.json")
        chunk_files = store.list_artifacts(job_id, "chunks")
        synth_files = store.list_artifacts(job_id, "syntheses")
        return {
            "final_report": final,
            "chunks": [f"/api/jobs/{job_id}/chunks/{i}"
                       for i in range(len(chunk_files))],
            "syntheses": [f"/api/jobs/{job_id}/syntheses/{g}"
                          for g in range(len(synth_files))],
            "dead_zones": store.load_artifact(job_id, "dead_zones.json"),
        }

    @app.get("/api/jobs/{job_id}/chunks/{index}")
    async def get_chunk(job_id: str, index: int):
        orch.get_job(job_id)
        return store.load_artifact(job_id, f"chunks/chunk_{index:04d}.json")

    @app.get("/api/jobs/{job_id}/syntheses/{index}")
    async def get_synthesis(job_id: str, index: int):
        orch.get_job(job_id)
        return store.load_artifact(job_id,
                                   f"syntheses/synthesis_{index:04d}.json")

    @app.get("/api/jobs/{job_id}/heatmap")
    async def get_heatmap(job_id: str, from_ms: int = 0,
                          to_ms: int | None = None):
        orch.get_job(job_id)
        if not store.has_artifact(job_id, "timeline.json"):
            hm = AttentionHeatmap(grid_w=cfg.grid_w, grid_h=cfg.grid_h,
                                  window=(from_ms, to_ms or from_ms))
            return hm.to_json_dict()
        timeline = store.load_artifact(job_id, "timeline.json")
        samples = []
        hi = float("inf") if to_ms is None else to_ms
        last_t = from_ms
        for track in timeline["tracks"]:
            for s in track["samples"]:
                last_t = max(last_t, s["t_ms"])
                if s["gx"] is None or not from_ms <= s["t_ms"] < hi:
                    continue
                samples.append(GazeTarget(gx=s["gx"], gy=s["gy"], score=1.0))
        window = (from_ms, to_ms if to_ms is not None else last_t + 1)
        hm = accumulate_heatmap(samples, cfg.grid_w, cfg.grid_h, window)
        return hm.to_json_dict()

    @app.get("/api/jobs/{job_id}/postures")
    async def get_postures(job_id: str, bin_s: float = 60.0):
        orch.get_job(job_id)
        if bin_s <= 0:
            return _error_response(400, "bad_request", "bin_s must be positive")
        if not store.has_artifact(job_id, "timeline.json"):
            return histogram_to_json_dict([], bin_s)
        timeline = store.load_artifact(job_id, "timeline.json")
        labelled = [
            (s["t_ms"], s["posture"])
            for track in timeline["tracks"]
            for s in track["samples"]
        ]
        return histogram_to_json_dict(histogram_from_labels(labelled, bin_s),
                                      bin_s)

    # -- progress stream -----------------------------------------------------

    @app.websocket("/api/jobs/{job_id}/progress")
    async def progress_ws(websocket: WebSocket, job_id: str):
        await websocket.accept()
        try:
            sub = orch.subscribe(job_id)
        except NotFoundError as e:
            await websocket.send_json(api_error("not_found", str(e)))
            await websocket.close(code=4404)
            return
        try:
            while True:
                event = await asyncio.to_thread(
                    sub.get, orch.latest_event(job_id), 0.25)
                if event is None:
                    continue
                await websocket.send_json(event.to_json_dict())
                if event.state in TERMINAL_STATES:
                    break
            await websocket.close()
        except WebSocketDisconnect:
            pass
        finally:
            orch.unsubscribe(job_id, sub)

    # Optional: serve a built dashboard. API routes above take precedence.
    if cfg.frontend_dir:
        from pathlib import Path

        from fastapi.staticfiles import StaticFiles

        frontend = Path(cfg.frontend_dir)
        if (frontend / "index.html").exists():
            app.mount("/", StaticFiles(directory=frontend, html=True),
                      name="dashboard")

    return app
