"""HTTP API over clarification sessions.

Sessions live in memory; the web UI (or any client) drives them through
four routes plus a health check:

* ``POST /api/sessions`` — create; runs the first generation and question
  round eagerly, so the response already carries revision 0.
* ``GET /api/sessions/{id}`` — read-only snapshot.
* ``POST /api/sessions/{id}/answers`` — record answers, run one refinement.
* ``POST /api/sessions/{id}/stop`` — end the session (idempotent).
* ``GET /api/health``

Error responses use ``{"error": {"code", "message"}}``. Concurrent
mutations of one session do not queue: the second caller gets 409.
"""

from __future__ import annotations

import copy
import threading
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from clarifier.backend import Backend, BackendError, RequestSettings
from clarifier.config import ConfigError, resolve_config
from clarifier.models import (
    Answer,
    AnswerSourceKind,
    ProblemDescription,
    SessionConfig,
    SessionStatus,
    SessionTranscript,
    ValidationError,
)
from clarifier.persistence import save_transcript_file, to_document
from clarifier.session import SessionEngine, new_session


class ApiError(Exception):
    def __init__(self, status_code: int, code: str, message: str):
        super().__init__(message)
        self.status_code = status_code
        self.code = code
        self.message = message


@dataclass
class SessionHandle:
    session_id: str
    transcript: SessionTranscript
    lock: threading.Lock = field(default_factory=threading.Lock)


class CreateSessionRequest(BaseModel):
    description: str
    config: Optional[dict[str, Any]] = None


class AnswerItem(BaseModel):
    question_ref: str
    text: Optional[str] = None
    skip: bool = False


class SubmitAnswersRequest(BaseModel):
    answers: list[AnswerItem] = Field(default_factory=list)


def _session_state(handle: SessionHandle) -> dict[str, Any]:
    transcript = handle.transcript
    pending = [
        {
            "question_ref": exch.ref,
            "topic": exch.question.topic.name,
            "text": exch.question.text,
            "score": exch.question.score,
        }
        for exch in transcript.pending_exchanges()
    ]
    return {
        "session_id": handle.session_id,
        "status": transcript.status.value,
        "pending_questions": pending,
        "transcript": to_document(transcript),
    }


def _config_overrides(base: SessionConfig, raw: dict[str, Any]) -> SessionConfig:
    # Reuse the config-file session parser for identical key handling.
    from clarifier.config import _session_from_file

    return _session_from_file(raw, base)


def create_app(
    coder: Backend,
    communicator: Backend,
    *,
    session_config: Optional[SessionConfig] = None,
    settings: Optional[RequestSettings] = None,
    out_dir: Optional[Path] = None,
    ui_dir: Optional[Path] = None,
) -> FastAPI:
    """Build the FastAPI app around one backend pair.

    ``out_dir``, when given, receives a transcript file after every
    mutation. ``ui_dir`` is mounted at ``/`` for the static web UI.
    """
    app = FastAPI(title="clarifier", version="0.1.0")
    base_config = session_config or SessionConfig()
    engine = SessionEngine(
        coder=coder, communicator=communicator, settings=settings or RequestSettings()
    )
    sessions: dict[str, SessionHandle] = {}

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    def persist(handle: SessionHandle) -> None:
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            save_transcript_file(handle.transcript, out_dir / f"{handle.session_id}.json")

    def get_handle(session_id: str) -> SessionHandle:
        handle = sessions.get(session_id)
        if handle is None:
            raise ApiError(404, "not_found", f"unknown session: {session_id}")
        return handle

    @app.get("/api/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionRequest) -> dict[str, Any]:
        try:
            description = ProblemDescription(text=body.description)
            config = (
                _config_overrides(base_config, body.config)
                if body.config
                else base_config
            )
        except (ValidationError, ConfigError) as exc:
            raise ApiError(400, "validation_error", str(exc))
        session = new_session(description, config)
        try:
            engine.advance(session)
        except BackendError as exc:
            raise ApiError(502, "backend_error", str(exc))
        except ValueError as exc:
            raise ApiError(502, "backend_error", f"coder output unusable: {exc}")
        handle = SessionHandle(session_id=uuid.uuid4().hex, transcript=session)
        sessions[handle.session_id] = handle
        persist(handle)
        return _session_state(handle)

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        return _session_state(get_handle(session_id))

    @app.post("/api/sessions/{session_id}/answers")
    def submit_answers(session_id: str, body: SubmitAnswersRequest) -> dict[str, Any]:
        handle = get_handle(session_id)
        if not handle.lock.acquire(blocking=False):
            raise ApiError(
                409, "conflict", "another mutation of this session is in progress"
            )
        try:
            transcript = handle.transcript
            if transcript.status != SessionStatus.ACTIVE:
                raise ApiError(
                    409,
                    "conflict",
                    f"session is not active (status: {transcript.status.value})",
                )
            pending_refs = {e.ref for e in transcript.pending_exchanges()}
            answers: dict[str, Answer] = {}
            for item in body.answers:
                if item.question_ref not in pending_refs:
                    raise ApiError(
                        422,
                        "unknown_question",
                        f"question_ref is not pending: {item.question_ref}",
                    )
                if item.question_ref in answers:
                    raise ApiError(
                        422,
                        "unknown_question",
                        f"duplicate answer for: {item.question_ref}",
                    )
                if item.skip:
                    answers[item.question_ref] = Answer(
                        question_ref=item.question_ref,
                        text="",
                        source=AnswerSourceKind.SKIPPED,
                    )
                elif item.text and item.text.strip():
                    answers[item.question_ref] = Answer(
                        question_ref=item.question_ref,
                        text=item.text,
                        source=AnswerSourceKind.HUMAN,
                    )
                else:
                    raise ApiError(
                        422,
                        "unknown_question",
                        f"answer for {item.question_ref} needs text or skip=true",
                    )
            # Mutate a copy so a backend failure leaves the session intact.
            work = copy.deepcopy(transcript)
            engine.record_answers(work, answers, fill_skipped=True)
            try:
                engine.advance(work)
            except BackendError as exc:
                raise ApiError(502, "backend_error", str(exc))
            except ValueError as exc:
                raise ApiError(502, "backend_error", f"coder output unusable: {exc}")
            handle.transcript = work
            persist(handle)
            return _session_state(handle)
        finally:
            handle.lock.release()

    @app.post("/api/sessions/{session_id}/stop")
    def stop_session(session_id: str) -> dict[str, Any]:
        handle = get_handle(session_id)
        if not handle.lock.acquire(blocking=False):
            raise ApiError(
                409, "conflict", "another mutation of this session is in progress"
            )
        try:
            engine.stop(handle.transcript)
            persist(handle)
            return _session_state(handle)
        finally:
            handle.lock.release()

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _build_cli_app() -> FastAPI:
    """App factory for ``uvicorn clarifier.service:_build_cli_app``; uses
    env-driven config only (HTTP backend)."""
    from clarifier.cli import make_backend, request_settings

    cfg = resolve_config()
    backend = make_backend(cfg)
    return create_app(
        coder=backend,
        communicator=backend,
        session_config=cfg.session,
        settings=request_settings(cfg),
    )
