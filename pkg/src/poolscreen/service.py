"""HTTP facade over the session store.

Thin by design: every protocol decision lives in the planners, every
durability decision in SessionStore.  Errors map to machine-readable
codes so the frontend can react without parsing prose.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .core import InputError
from .session import SessionStore, StageConflict, UnknownSession


class CreateSessionBody(BaseModel):
    protocol: dict


class ResultEntry(BaseModel):
    test_id: int
    outcome: str


class SubmitResultsBody(BaseModel):
    results: list[ResultEntry]


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message}},
    )


def create_app(data_dir: Union[str, Path]) -> FastAPI:
    app = FastAPI(title="poolscreen session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(data_dir)
    app.state.store = store

    @app.exception_handler(UnknownSession)
    async def _unknown(request: Request, exc: UnknownSession):
        return _error(404, "unknown_session", f"no session {exc.session_id!r}")

    @app.exception_handler(StageConflict)
    async def _conflict(request: Request, exc: StageConflict):
        return _error(409, "stage_conflict", str(exc))

    @app.exception_handler(InputError)
    async def _invalid(request: Request, exc: InputError):
        return _error(422, "invalid_input", str(exc))

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        return store.create(body.protocol).view()

    @app.get("/sessions")
    def list_sessions(status: Optional[str] = None):
        if status not in (None, "awaiting_results", "concluded"):
            raise InputError(f"unknown status filter {status!r}")
        return {"sessions": [s.view() for s in store.list_sessions(status)]}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return store.get(session_id).view()

    @app.post("/sessions/{session_id}/results")
    def submit_results(session_id: str, body: SubmitResultsBody):
        session = store.submit(
            session_id, [r.model_dump() for r in body.results]
        )
        return session.view()

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        store.delete(session_id)

    return app
