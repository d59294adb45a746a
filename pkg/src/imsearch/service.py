"""HTTP service exposing session-based retrieval and ingestion.

Endpoints (see docs/api.md):

    POST /v1/index                 build/swap the index from a manifest or inline records
    POST /v1/sessions              create a session {kind}
    POST /v1/sessions/{id}/query   run the pipeline for one round
    GET  /v1/sessions/{id}         session state
    GET  /v1/images/{id}           stored image bytes
    GET  /health                   liveness + per-role backend reachability

Errors are structured JSON {code, message, stage?}: 422 for query
validation, 404 for unknown sessions/images, 409 for concurrent ingest,
503 when a backend is unavailable.
"""

from __future__ import annotations

import base64
import logging
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .engine import RetrievalEngine
from .errors import (
    BackendUnavailable,
    EngineError,
    IngestInProgress,
    QueryValidationError,
    SessionNotFound,
)
from .index.store import load_manifest
from .model import ImageRecord, QueryKind
from .util import resolve_image_bytes, sniff_content_type

log = logging.getLogger(__name__)


class IndexRequest(BaseModel):
    manifest_path: str | None = None
    records: list[dict] | None = None


class SessionRequest(BaseModel):
    kind: str


class ReferenceImage(BaseModel):
    uri: str | None = None
    b64: str | None = None


class QueryRequest(BaseModel):
    text: str
    reference_image: ReferenceImage | None = None
    stages: int = 3
    top_k: int | None = None


def _status_for(exc: EngineError) -> int:
    if isinstance(exc, QueryValidationError):
        return 422
    if isinstance(exc, SessionNotFound):
        return 404
    if isinstance(exc, IngestInProgress):
        return 409
    if isinstance(exc, BackendUnavailable):
        return 503
    return 500


def _reference_record(ref: ReferenceImage | None) -> ImageRecord | None:
    if ref is None:
        return None
    if ref.b64:
        data = base64.b64decode(ref.b64)
        uri = ref.uri or ("data:application/octet-stream;base64," + ref.b64)
        return ImageRecord.from_bytes(id="upload-" + uri[-12:], uri=uri, data=data)
    if ref.uri:
        data = resolve_image_bytes(ref.uri)
        return ImageRecord.from_bytes(id="ref-" + ref.uri[-12:], uri=ref.uri, data=data)
    return None


def create_app(engine: RetrievalEngine, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="imsearch", version="0.1.0")
    app.state.engine = engine

    @app.exception_handler(EngineError)
    def engine_error_handler(request: Request, exc: EngineError):
        return JSONResponse(status_code=_status_for(exc), content=exc.to_dict())

    @app.post("/v1/index")
    def build_index(body: IndexRequest):
        if body.manifest_path:
            records = load_manifest(body.manifest_path)
        elif body.records:
            records = []
            for entry in body.records:
                data = resolve_image_bytes(entry["uri"])
                records.append(ImageRecord.from_bytes(id=str(entry["id"]), uri=entry["uri"], data=data))
        else:
            return JSONResponse(
                status_code=422,
                content={"code": "InvalidRequest", "message": "manifest_path or records[] required"},
            )
        index = engine.ingest_images(records)
        return {"index_id": f"index-{len(index)}", "n_images": len(index)}

    @app.post("/v1/sessions")
    def create_session(body: SessionRequest):
        try:
            kind = QueryKind(body.kind)
        except ValueError:
            return JSONResponse(
                status_code=422,
                content={"code": "InvalidRequest", "message": f"unknown kind {body.kind!r}"},
            )
        session = engine.sessions.create(kind)
        return {"session_id": session.session_id, "kind": kind.value}

    @app.post("/v1/sessions/{session_id}/query")
    def query(session_id: str, body: QueryRequest):
        reference = _reference_record(body.reference_image)
        session, result = engine.run_round(
            session_id, body.text, reference=reference, stages=body.stages
        )
        top_k = body.top_k or engine.config.top_k_return
        payload = result.ranking_payload(top_k=top_k)
        payload["session_id"] = session.session_id
        payload["round"] = session.round_count
        payload["instruction"] = result.instruction
        payload["ref_desc"] = result.ref_desc
        return payload

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return engine.sessions.get(session_id).to_dict()

    @app.get("/v1/images/{image_id}")
    def get_image(image_id: str):
        index = engine.require_index()
        if image_id not in index:
            return JSONResponse(
                status_code=404,
                content={"code": "UnknownImage", "message": f"no image {image_id!r}"},
            )
        record = index.record(image_id)
        data = resolve_image_bytes(record.uri)
        return Response(content=data, media_type=sniff_content_type(data))

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "index_size": len(engine.index) if engine.index is not None else 0,
            "backends": engine.gateway.ping_all(),
        }

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
