"""HTTP/1.1 JSON surface over the annotation service.

Endpoints:
    POST /session                 create a session
    GET  /session/{id}/queue      cards awaiting verdicts
    POST /session/{id}/labels     commit verdicts
    GET  /session/{id}/progress   budget and completion state

Bind-local by default; there is deliberately no authentication layer.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .service import AnnotationService, ServiceError


class CreateSessionBody(BaseModel):
    manifest_digest: str
    strategy: str = "us"
    budget: int = 100
    session_id: str | None = None


class VerdictBody(BaseModel):
    card_id: str
    verdict: str  # correct | error | skip
    true_type: str | None = None


class CommitBody(BaseModel):
    verdicts: list[VerdictBody]
    annotator_id: str = "human"


def create_app(service: AnnotationService) -> FastAPI:
    app = FastAPI(title="kgtyperr annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = service

    @app.post("/session")
    def create_session(body: CreateSessionBody):
        try:
            session = service.create_session(
                manifest_digest=body.manifest_digest,
                strategy=body.strategy,
                budget=body.budget,
                session_id=body.session_id,
            )
        except ServiceError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"session_id": session.session_id, "budget": session.budget}

    @app.get("/session/{session_id}/queue")
    def queue(session_id: str):
        try:
            return service.serve_queue(session_id)
        except ServiceError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/session/{session_id}/labels")
    def labels(session_id: str, body: CommitBody):
        try:
            return service.commit_labels(
                session_id,
                [v.model_dump() for v in body.verdicts],
                annotator_id=body.annotator_id,
            )
        except ServiceError as exc:
            status = 404 if "unknown session" in str(exc) else 400
            raise HTTPException(status_code=status, detail=str(exc))

    @app.get("/session/{session_id}/progress")
    def progress(session_id: str):
        try:
            return service.progress(session_id)
        except ServiceError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    return app
