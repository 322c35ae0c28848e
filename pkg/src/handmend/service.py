"""Session-oriented HTTP API over the pipeline.

The API is a pure façade: handlers validate transport concerns (uploads,
ids, locking, expiry) and delegate every behavior to the pipeline module,
so a scenario driven over HTTP produces byte-identical artifacts to the
same scenario driven directly or via the CLI.

Step execution always goes through a worker thread guarded by a per
session lock: a second request against a busy session gets 423. In
synchronous mode (default) the handler waits up to the configured step
timeout; with ``async_steps`` enabled it returns 202 immediately and the
client polls the step status endpoint.
"""

from __future__ import annotations

import dataclasses
import io
import json
import secrets
import shutil
import threading
import time
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, Form, Request, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from PIL import Image, UnidentifiedImageError

import numpy as np

from .backends import BackendSet, build_backends
from .pipeline import (
    STEPS,
    PipelineSession,
    PredecessorNotDone,
    SessionParams,
    StepExecutionError,
    UnknownArtifact,
)
from .templates import TemplateRegistry


@dataclasses.dataclass
class ServiceConfig:
    """Server knobs; everything else comes from pipeline semantics."""

    artifact_root: Path = Path("sessions")
    backend_config: Mapping | None = None
    session_ttl: float = 3600.0
    step_timeout: float = 120.0
    max_upload_bytes: int = 16 * 1024 * 1024
    async_steps: bool = False


class _SessionEntry:
    def __init__(self, session: PipelineSession) -> None:
        self.session = session
        self.created = time.monotonic()
        self.lock = threading.Lock()
        self.running: dict[str, threading.Thread] = {}
        self.outcome: dict[str, dict] = {}


class _Registry:
    def __init__(self) -> None:
        self._entries: dict[str, _SessionEntry] = {}
        self._expired: set[str] = set()
        self._guard = threading.Lock()

    def add(self, entry: _SessionEntry) -> None:
        with self._guard:
            self._entries[entry.session.id] = entry

    def get(self, session_id: str) -> _SessionEntry | None:
        with self._guard:
            return self._entries.get(session_id)

    def remove(self, session_id: str) -> _SessionEntry | None:
        with self._guard:
            return self._entries.pop(session_id, None)

    def expire(self, session_id: str) -> None:
        with self._guard:
            self._entries.pop(session_id, None)
            self._expired.add(session_id)

    def is_expired(self, session_id: str) -> bool:
        with self._guard:
            return session_id in self._expired


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message, **extra})


def create_app(
    config: ServiceConfig | None = None,
    backends: BackendSet | None = None,
    registry: TemplateRegistry | None = None,
) -> FastAPI:
    config = config or ServiceConfig()
    backends = backends if backends is not None else build_backends(config.backend_config)
    registry = registry if registry is not None else TemplateRegistry.built_in()
    root = Path(config.artifact_root)
    root.mkdir(parents=True, exist_ok=True)
    sessions = _Registry()

    app = FastAPI(title="hand restoration service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.config = config
    app.state.sessions = sessions

    def resolve(session_id: str) -> _SessionEntry | JSONResponse:
        if sessions.is_expired(session_id):
            return _error(410, f"session {session_id!r} has expired")
        entry = sessions.get(session_id)
        if entry is None:
            return _error(404, f"no session {session_id!r}")
        if time.monotonic() - entry.created > config.session_ttl:
            sessions.expire(session_id)
            return _error(410, f"session {session_id!r} has expired")
        return entry

    def step_payload(entry: _SessionEntry, step: str) -> dict:
        status = entry.session.step_status()[step]
        running = step in entry.running and entry.running[step].is_alive()
        payload = {
            "step": step,
            "state": "running" if running else "idle",
            "status": status["status"],
            "reason": status["reason"],
            "run": status["run"],
            "warnings": status["warnings"],
            "artifacts": {
                logical: f"/sessions/{entry.session.id}/artifacts/{stored}"
                for logical, stored in status["artifacts"].items()
            },
        }
        outcome = entry.outcome.get(step)
        if outcome is not None and not running:
            payload.update(outcome)
        return payload

    def session_payload(entry: _SessionEntry) -> dict:
        session = entry.session
        return {
            "id": session.id,
            "params": session.params.to_dict(),
            "steps": session.step_status(),
            "step_order": list(STEPS),
            "artifacts": {
                logical: f"/sessions/{session.id}/artifacts/{stored}"
                for logical, stored in session.current_artifacts().items()
            },
        }

    @app.post("/sessions")
    async def create_session(image: UploadFile, params: str = Form("")) -> Response:
        raw = await image.read()
        if len(raw) > config.max_upload_bytes:
            return _error(413, f"upload exceeds {config.max_upload_bytes} bytes")
        if not raw:
            return _error(400, "empty upload")
        try:
            with Image.open(io.BytesIO(raw)) as img:
                array = np.asarray(img.convert("RGB"), dtype=np.uint8)
        except (UnidentifiedImageError, OSError, ValueError):
            return _error(400, "upload is not a decodable image")
        try:
            parsed = json.loads(params) if params else {}
            if not isinstance(parsed, dict):
                raise ValueError("params must be a JSON object")
            session_params = SessionParams.from_dict(parsed)
        except (ValueError, TypeError) as exc:
            return _error(422, f"invalid params: {exc}")
        if session_params.template_name not in registry:
            return _error(
                422,
                f"unknown template {session_params.template_name!r}",
                field="template_name",
                known=registry.names(),
            )
        name = _fresh_dir_name(root)
        session = PipelineSession.create(
            root / name,
            array,
            session_params,
            backends,
            registry=registry,
            session_id=name,
        )
        entry = _SessionEntry(session)
        sessions.add(entry)
        return JSONResponse(status_code=201, content=session_payload(entry))

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> Response:
        entry = resolve(session_id)
        if isinstance(entry, JSONResponse):
            return entry
        return JSONResponse(session_payload(entry))

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str) -> Response:
        if sessions.is_expired(session_id):
            return _error(410, f"session {session_id!r} has expired")
        entry = sessions.remove(session_id)
        if entry is None:
            return _error(404, f"no session {session_id!r}")
        shutil.rmtree(entry.session.directory, ignore_errors=True)
        return Response(status_code=204)

    @app.get("/sessions/{session_id}/steps/{step}")
    def poll_step(session_id: str, step: str) -> Response:
        entry = resolve(session_id)
        if isinstance(entry, JSONResponse):
            return entry
        if step not in STEPS:
            return _error(404, f"no step {step!r}; steps are {list(STEPS)}")
        return JSONResponse(step_payload(entry, step))

    @app.post("/sessions/{session_id}/steps/{step}")
    async def run_step(session_id: str, step: str, request: Request) -> Response:
        entry = resolve(session_id)
        if isinstance(entry, JSONResponse):
            return entry
        if step not in STEPS:
            return _error(404, f"no step {step!r}; steps are {list(STEPS)}")
        body = await request.body()
        try:
            overrides = json.loads(body) if body else {}
            if not isinstance(overrides, dict):
                raise ValueError("body must be a JSON object")
            override_params = overrides.get("params", {})
            if not isinstance(override_params, dict):
                raise ValueError("'params' must be a JSON object")
            merged = (
                entry.session.params.replace(**override_params)
                if override_params
                else None
            )
        except (ValueError, TypeError) as exc:
            return _error(422, f"invalid overrides: {exc}")
        if merged is not None and merged.template_name not in registry:
            return _error(422, f"unknown template {merged.template_name!r}", field="template_name")

        # predecessor check before 423/thread dance so ordering errors are
        # reported even while another step of the session is running
        index = STEPS.index(step)
        for previous in STEPS[:index]:
            if not entry.session.is_done(previous):
                return _error(409, f"predecessor {previous!r} of {step!r} is not done")

        if not entry.lock.acquire(blocking=False):
            return _error(423, "session is busy running another step")

        entry.outcome.pop(step, None)

        def work() -> None:
            try:
                if merged is not None:
                    entry.session.set_params(merged)
                entry.session.rerun_from(step)
                entry.outcome[step] = {}
            except PredecessorNotDone as exc:
                entry.outcome[step] = {"error": "PredecessorNotDone", "message": str(exc)}
            except StepExecutionError as exc:
                entry.outcome[step] = {
                    "error": type(exc.cause).__name__,
                    "message": str(exc.cause),
                    "recoverable": exc.recoverable,
                }
            except Exception as exc:  # pragma: no cover - defensive
                entry.outcome[step] = {"error": type(exc).__name__, "message": str(exc)}
            finally:
                entry.running.pop(step, None)
                entry.lock.release()

        thread = threading.Thread(target=work, daemon=True)
        entry.running[step] = thread
        thread.start()

        if config.async_steps:
            return JSONResponse(
                status_code=202,
                content={
                    "step": step,
                    "state": "running",
                    "poll": f"/sessions/{session_id}/steps/{step}",
                },
            )

        thread.join(config.step_timeout)
        if thread.is_alive():
            return _error(504, f"step {step!r} did not finish within {config.step_timeout}s")
        outcome = entry.outcome.get(step, {})
        if outcome.get("error") == "PredecessorNotDone":
            return _error(409, outcome["message"])
        if outcome.get("error"):
            return _error(
                502,
                outcome["message"],
                backend_error=outcome["error"],
                recoverable=outcome.get("recoverable", False),
            )
        return JSONResponse(step_payload(entry, step))

    @app.get("/sessions/{session_id}/artifacts/{name}")
    def get_artifact(session_id: str, name: str) -> Response:
        entry = resolve(session_id)
        if isinstance(entry, JSONResponse):
            return entry
        try:
            path = entry.session.artifact_path(name)
        except UnknownArtifact as exc:
            return _error(404, str(exc))
        media = "image/png" if path.suffix == ".png" else "application/json"
        return FileResponse(path, media_type=media)

    @app.get("/templates")
    def list_templates() -> Response:
        return JSONResponse({"templates": registry.names()})

    return app


def _fresh_dir_name(root: Path) -> str:
    while True:
        name = secrets.token_urlsafe(16)
        if not (root / name).exists():
            return name
