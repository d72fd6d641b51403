"""HTTP JSON service exposing resolution sessions.

A thin adapter over the session module: handlers hold no business logic
beyond locking, id bookkeeping, and status-code mapping.  Sessions live in
memory for the service lifetime.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Dict, Optional

from fastapi import Body, FastAPI, HTTPException, Response

from . import session as sess
from .errors import (
    ForcedRemovalError,
    ModelError,
    PhaseError,
    StaleOptionError,
    UndoEmptyError,
    UnresolvableError,
)
from .model import model_fingerprint, parse_model, serialize_model


@dataclass
class _Box:
    session: sess.Session
    fingerprint: str
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self):
        self._lock = threading.Lock()
        self._boxes: Dict[str, _Box] = {}

    def create(self, session: sess.Session) -> str:
        sid = uuid.uuid4().hex[:12]
        with self._lock:
            self._boxes[sid] = _Box(
                session=session, fingerprint=model_fingerprint(session.initial_model)
            )
        return sid

    def get(self, sid: str) -> _Box:
        with self._lock:
            box = self._boxes.get(sid)
        if box is None:
            raise HTTPException(status_code=404, detail=f"unknown session {sid}")
        return box


def _presentation_payload(sid: str, box: _Box) -> dict:
    doc = sess.presentation_document(box.session)
    doc["session_id"] = sid
    doc["model_fingerprint"] = box.fingerprint
    return doc


def _find_option(box: _Box, option_id: str):
    s = box.session
    if s.presentation is not None:
        found = s.presentation.find(option_id)
        if found is not None:
            return found
    if option_id in set(s.seen_options):
        raise HTTPException(
            status_code=409,
            detail={"code": "stale_option", "message": "presentation has changed"},
        )
    raise HTTPException(status_code=404, detail=f"unknown option {option_id}")


def create_app() -> FastAPI:
    app = FastAPI(title="gcsdoctor", version="0.1.0")
    store = SessionStore()
    app.state.store = store

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict = Body(...)):
        document = payload.get("model")
        if document is None:
            raise HTTPException(status_code=422, detail="missing 'model'")
        if not isinstance(document, str):
            import json

            document = json.dumps(document)
        try:
            model = parse_model(document)
            session = sess.start(model)
        except UnresolvableError as exc:
            raise HTTPException(
                status_code=422, detail={"code": "unresolvable", "message": str(exc)}
            ) from None
        except ModelError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        sid = store.create(session)
        return {
            "session_id": sid,
            "state": sess.state_document(session.state),
            "phase": session.phase.value,
        }

    @app.get("/sessions/{sid}")
    def get_presentation(sid: str):
        box = store.get(sid)
        with box.lock:
            return _presentation_payload(sid, box)

    def _decide(sid: str, option_id: Optional[str], verdict: str):
        box = store.get(sid)
        if option_id is None:
            raise HTTPException(status_code=422, detail="missing 'option_id'")
        with box.lock:
            option = _find_option(box, option_id)
            try:
                if verdict == "accept":
                    box.session = sess.accept(box.session, option)
                else:
                    box.session = sess.reject(box.session, option)
            except StaleOptionError as exc:
                raise HTTPException(
                    status_code=409,
                    detail={"code": "stale_option", "message": str(exc)},
                ) from None
            except ForcedRemovalError as exc:
                raise HTTPException(
                    status_code=409,
                    detail={"code": "forced_removal", "message": str(exc)},
                ) from None
            except UnresolvableError as exc:
                raise HTTPException(
                    status_code=422,
                    detail={"code": "unresolvable", "message": str(exc)},
                ) from None
            except PhaseError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from None
            return _presentation_payload(sid, box)

    @app.post("/sessions/{sid}/accept")
    def accept_option(sid: str, payload: dict = Body(...)):
        return _decide(sid, payload.get("option_id"), "accept")

    @app.post("/sessions/{sid}/reject")
    def reject_option(sid: str, payload: dict = Body(...)):
        return _decide(sid, payload.get("option_id"), "reject")

    @app.post("/sessions/{sid}/undo")
    def undo_decision(sid: str):
        box = store.get(sid)
        with box.lock:
            try:
                box.session = sess.undo(box.session)
            except UndoEmptyError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from None
            return _presentation_payload(sid, box)

    @app.get("/sessions/{sid}/model")
    def get_model(sid: str):
        box = store.get(sid)
        with box.lock:
            return Response(
                content=serialize_model(box.session.model),
                media_type="application/json",
            )

    @app.get("/sessions/{sid}/journal")
    def get_journal(sid: str):
        box = store.get(sid)
        with box.lock:
            return Response(
                content=sess.journal_jsonl(box.session),
                media_type="application/x-ndjson",
            )

    return app
