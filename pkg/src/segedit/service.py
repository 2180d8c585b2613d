"""HTTP service exposing edit sessions over a small JSON API.

All bodies are JSON except the image upload (multipart PNG) and image
downloads (image/png). Step image index 0 is the uploaded image; index k
is the output of step k. Per-session mutations are serialized with a
lock: a second concurrent mutation gets 409 instead of waiting.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import threading
from pathlib import Path

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from segedit.backends import BackendStack, default_registry
from segedit.core import ImageBuffer, SegeditError
from segedit.pipeline import (
    EditInstruction,
    EditSession,
    EditStep,
    NoMatchError,
    NoSegmentsError,
    PipelineConfig,
    PipelineError,
    StageError,
    edit_once,
    new_session_id,
    undo,
)
from segedit.ranking import rank_segments, select_target
from segedit.store import SessionNotFoundError, SessionStore

logger = logging.getLogger("segedit.service")

MAX_IMAGE_SIDE = 4096

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ApiError(Exception):
    """Error with a fixed HTTP status and machine-readable code."""

    def __init__(self, status: int, code: str, detail: str, **extra):
        super().__init__(detail)
        self.status = status
        self.code = code
        self.detail = detail
        self.extra = extra

    def response(self) -> JSONResponse:
        body = {"error": self.code, "detail": self.detail}
        body.update(self.extra)
        return JSONResponse(status_code=self.status, content=body)


class RankBody(BaseModel):
    source_prompt: str


class EditBody(BaseModel):
    source_prompt: str
    target_prompt: str
    override_segment_id: str | None = None


class UndoBody(BaseModel):
    to_step: int


class _SessionHandle:
    """One loaded session plus its mutation lock."""

    def __init__(self, session: EditSession):
        self.session = session
        self.lock = threading.Lock()


class _Sessions:
    """In-memory session table backed by the store."""

    def __init__(self, store: SessionStore):
        self.store = store
        self._handles: dict[str, _SessionHandle] = {}
        self._table_lock = threading.Lock()

    def add(self, session: EditSession) -> _SessionHandle:
        handle = _SessionHandle(session)
        with self._table_lock:
            self._handles[session.session_id] = handle
        self.store.save(session)
        return handle

    def get(self, session_id: str) -> _SessionHandle:
        with self._table_lock:
            handle = self._handles.get(session_id)
            if handle is not None:
                return handle
        try:
            session = self.store.load(session_id)
        except SessionNotFoundError:
            raise ApiError(
                404, "unknown_session", f"no session {session_id!r}"
            ) from None
        with self._table_lock:
            handle = self._handles.setdefault(session_id, _SessionHandle(session))
        return handle


def _decode_upload(data: bytes) -> ImageBuffer:
    if not data.startswith(_PNG_SIGNATURE):
        raise ApiError(400, "bad_image", "upload is not a PNG file")
    try:
        image = ImageBuffer.from_png_bytes(data)
    except (SegeditError, ValueError, OSError) as exc:
        raise ApiError(400, "bad_image", f"cannot decode PNG: {exc}") from exc
    if image.width > MAX_IMAGE_SIDE or image.height > MAX_IMAGE_SIDE:
        raise ApiError(
            400,
            "image_too_large",
            f"{image.width}x{image.height} exceeds "
            f"{MAX_IMAGE_SIDE}x{MAX_IMAGE_SIDE}",
        )
    return image


def _parse_config(raw: str | None) -> PipelineConfig:
    if raw is None or not raw.strip():
        return PipelineConfig()
    try:
        obj = json.loads(raw)
        if not isinstance(obj, dict):
            raise ValueError("config must be a JSON object")
        return PipelineConfig.from_json(obj)
    except (ValueError, TypeError) as exc:
        raise ApiError(400, "bad_config", f"invalid config: {exc}") from exc


def _step_summary(session_id: str, index: int, step: EditStep) -> dict:
    out = {
        "index": index,
        "status": step.status.value,
        "instruction": {
            "source_prompt": step.instruction.source_prompt,
            "target_prompt": step.instruction.target_prompt,
        },
        "seed": step.seed,
        "error": step.error,
        "image_url": f"/v1/sessions/{session_id}/steps/{index}/image",
    }
    if step.selection is not None:
        sel = step.selection
        out["selection"] = {
            "outcome": "matched" if sel.matched else "no_match",
            "selected_segment_id": (
                sel.selected.segment.segment_id if sel.matched else None
            ),
            "threshold_used": sel.threshold_used,
            "overridden": sel.overridden,
        }
    else:
        out["selection"] = None
    return out


def _session_summary(session: EditSession) -> dict:
    sid = session.session_id
    return {
        "session_id": sid,
        "width": session.base_image.width,
        "height": session.base_image.height,
        "config": session.config.to_json(),
        "current_step": len(session.steps),
        "steps": [
            _step_summary(sid, i + 1, step)
            for i, step in enumerate(session.steps)
        ],
    }


def _rank_preview(session: EditSession, stack: BackendStack, prompt: str) -> dict:
    if not prompt.strip():
        raise ApiError(400, "bad_request", "source_prompt is empty")
    image = session.current_image
    try:
        segments = stack.segmenter.segment(image)
        if not segments:
            raise NoSegmentsError(
                f"segmenter {stack.segmenter.info.name!r} returned no segments"
            )
        ranked = rank_segments(
            image,
            segments,
            prompt,
            stack.scorer,
            spec=session.config.crop_spec,
            temperature=session.config.temperature,
        )
        selection = select_target(ranked, session.config.threshold)
    except NoSegmentsError as exc:
        raise ApiError(502, "backend_failure", str(exc), stage="segment") from exc
    except SegeditError as exc:
        stage = exc.stage if isinstance(exc, StageError) else "rank"
        raise ApiError(502, "backend_failure", str(exc), stage=stage) from exc
    return {
        "session_id": session.session_id,
        "source_prompt": prompt,
        "outcome": "matched" if selection.matched else "no_match",
        "selected_segment_id": (
            selection.selected.segment.segment_id if selection.matched else None
        ),
        "threshold_used": selection.threshold_used,
        "segments": [
            {
                "segment_id": r.segment.segment_id,
                "mask": r.segment.mask.to_json(),
                "bbox": list(r.segment.bbox),
                "area": r.segment.area,
                "raw_score": r.raw_score,
                "norm_score": r.norm_score,
                "rank": r.rank,
            }
            for r in ranked
        ],
    }


def create_app(
    store_dir: str | Path,
    registry: dict[str, BackendStack] | None = None,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    registry = registry if registry is not None else default_registry()
    store = SessionStore(store_dir)
    sessions = _Sessions(store)
    app = FastAPI(title="segedit", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def stack_for(config: PipelineConfig) -> BackendStack:
        stack = registry.get(config.stack_id)
        if stack is None:
            raise ApiError(
                404, "unknown_stack", f"no backend stack {config.stack_id!r}"
            )
        return stack

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "bad_request", "detail": str(exc.errors())},
        )

    @app.get("/v1/stacks")
    def list_stacks():
        return {
            "stacks": [registry[k].describe() for k in sorted(registry)]
        }

    @app.post("/v1/sessions", status_code=201)
    def create_session(
        image: UploadFile = File(...),
        config: str | None = Form(None),
    ):
        pipeline_config = _parse_config(config)
        stack_for(pipeline_config)  # reject unknown stacks up front
        buffer = _decode_upload(image.file.read())
        session = EditSession(
            session_id=new_session_id(),
            base_image=buffer,
            steps=(),
            config=pipeline_config,
        )
        sessions.add(session)
        logger.info(
            "created session %s (%dx%d, stack=%s)",
            session.session_id,
            buffer.width,
            buffer.height,
            pipeline_config.stack_id,
        )
        return {
            "session_id": session.session_id,
            "width": buffer.width,
            "height": buffer.height,
        }

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_summary(sessions.get(session_id).session)

    @app.get("/v1/sessions/{session_id}/steps/{index}/image")
    def get_step_image(session_id: str, index: int):
        session = sessions.get(session_id).session
        if not (0 <= index <= len(session.steps)):
            raise ApiError(
                404,
                "unknown_step",
                f"step {index} outside [0, {len(session.steps)}]",
            )
        image = (
            session.base_image if index == 0 else session.steps[index - 1].output_image
        )
        return Response(content=image.to_png_bytes(), media_type="image/png")

    @app.post("/v1/sessions/{session_id}/rank")
    def rank(session_id: str, body: RankBody):
        handle = sessions.get(session_id)
        session = handle.session
        return _rank_preview(session, stack_for(session.config), body.source_prompt)

    @app.post("/v1/sessions/{session_id}/edit")
    def edit(session_id: str, body: EditBody):
        if not body.source_prompt.strip() or not body.target_prompt.strip():
            raise ApiError(400, "bad_request", "prompts must be non-empty")
        handle = sessions.get(session_id)
        if not handle.lock.acquire(blocking=False):
            raise ApiError(
                409, "session_busy", "another mutation is in progress"
            )
        try:
            session = handle.session
            stack = stack_for(session.config)
            step_config = dataclasses.replace(
                session.config, seed=session.config.seed + len(session.steps)
            )
            instruction = EditInstruction(body.source_prompt, body.target_prompt)
            try:
                step = edit_once(
                    session.current_image,
                    instruction,
                    stack,
                    step_config,
                    override_segment_id=body.override_segment_id,
                )
            except NoMatchError as exc:
                raise ApiError(422, "no_match", str(exc)) from exc
            except StageError as exc:
                raise ApiError(
                    502, "backend_failure", str(exc), stage=exc.stage
                ) from exc
            except PipelineError as exc:
                stage = getattr(exc, "stage", "pipeline")
                raise ApiError(
                    502, "backend_failure", str(exc), stage=stage
                ) from exc
            session = session.with_step(step)
            store.save(session)
            handle.session = session
            return _step_summary(session.session_id, len(session.steps), step)
        finally:
            handle.lock.release()

    @app.post("/v1/sessions/{session_id}/undo")
    def undo_steps(session_id: str, body: UndoBody):
        handle = sessions.get(session_id)
        if not handle.lock.acquire(blocking=False):
            raise ApiError(
                409, "session_busy", "another mutation is in progress"
            )
        try:
            session = handle.session
            if not (0 <= body.to_step <= len(session.steps)):
                raise ApiError(
                    404,
                    "unknown_step",
                    f"to_step {body.to_step} outside [0, {len(session.steps)}]",
                )
            session = undo(session, body.to_step)
            store.save(session)
            handle.session = session
            return _session_summary(session)
        finally:
            handle.lock.release()

    if frontend_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount(
            "/", StaticFiles(directory=str(frontend_dir), html=True), name="ui"
        )

    return app
