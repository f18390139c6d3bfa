"""HTTP front door: session persistence, per-session turn serialization and
the wire contract consumed by the web chat UI.

Engines are loaded once and shared read-only; sessions are independent and
fully concurrent, with a per-session lock serializing turns inside one
session.  An optional append-only journal snapshots each session after every
turn so a restart can reconstruct identical state.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .intent import EmptyQuestion
from .router import Response, Router, SessionState, TurnRecord, trace_to_dict
from .slots import SlotState

logger = logging.getLogger(__name__)


class UnknownSession(KeyError):
    pass


class EmptyText(ValueError):
    pass


def serialize_session(session: SessionState) -> dict:
    return {
        "session_id": session.session_id,
        "prev_question": session.prev_question,
        "history": [
            {"question": t.question, "reply": t.reply, "source": t.source,
             "timestamp": t.timestamp}
            for t in session.history
        ],
        "slot": None if session.slot is None else {
            "task_id": session.slot.task_id,
            "filled": {k: list(v) for k, v in session.slot.filled.items()},
            "awaiting": session.slot.awaiting,
            "retries": session.slot.retries,
        },
    }


def deserialize_session(doc: dict) -> SessionState:
    slot = None
    if doc.get("slot") is not None:
        s = doc["slot"]
        slot = SlotState(
            task_id=s["task_id"],
            filled={k: (v[0], v[1]) for k, v in s["filled"].items()},
            awaiting=s.get("awaiting"),
            retries=s.get("retries", 0),
        )
    return SessionState(
        session_id=doc["session_id"],
        history=[
            TurnRecord(t["question"], t["reply"], t["source"], t["timestamp"])
            for t in doc.get("history", ())
        ],
        prev_question=doc.get("prev_question"),
        slot=slot,
    )


class SessionStore:
    """In-memory session map with an optional append-only JSONL journal.

    Journal records are full post-turn snapshots; replay applies them in
    order, so the last snapshot per session wins and the rebuilt store is
    identical to the pre-restart one.
    """

    def __init__(self, journal_path: str | Path | None = None,
                 id_factory: Callable[[], str] | None = None):
        self._sessions: dict[str, SessionState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._map_lock = threading.Lock()
        self._journal_lock = threading.Lock()
        self._journal_path = Path(journal_path) if journal_path else None
        self._id_factory = id_factory or (lambda: uuid.uuid4().hex[:12])
        if self._journal_path and self._journal_path.exists():
            self._replay()

    def create(self) -> SessionState:
        with self._map_lock:
            sid = self._id_factory()
            while sid in self._sessions:
                sid = self._id_factory()
            session = SessionState(session_id=sid)
            self._sessions[sid] = session
            self._locks[sid] = threading.Lock()
            return session

    def get(self, session_id: str) -> SessionState | None:
        with self._map_lock:
            return self._sessions.get(session_id)

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._map_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def ids(self) -> list[str]:
        with self._map_lock:
            return list(self._sessions)

    def record_turn(self, session: SessionState) -> None:
        if self._journal_path is None:
            return
        line = json.dumps(serialize_session(session), ensure_ascii=False)
        with self._journal_lock:
            with open(self._journal_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def _replay(self) -> None:
        for line in self._journal_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            session = deserialize_session(json.loads(line))
            self._sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()
        logger.info("replayed %d sessions from %s", len(self._sessions), self._journal_path)


class AssistantService:
    """Transport-independent service layer; the HTTP app is a thin shell."""

    def __init__(self, router: Router, store: SessionStore):
        self.router = router
        self.store = store

    def handle_message(self, text: str, session_id: str | None = None,
                       debug: bool = False) -> dict:
        if not text or not text.strip():
            raise EmptyText("text must be non-empty")
        if session_id is not None:
            session = self.store.get(session_id)
            if session is None:
                raise UnknownSession(session_id)
        else:
            session = self.store.create()
        with self.store.lock_for(session.session_id):
            try:
                response, trace = self.router.handle_turn(session, text)
            except EmptyQuestion:
                raise EmptyText("text must be non-empty")
            except Exception:
                # never leak internals to the wire; reply with a staff handoff
                logger.exception("turn failed for session %s", session.session_id)
                response, trace = (
                    Response(self.router.config.staff_template.format(scenario="error"),
                             "staff", None, "error"),
                    [],
                )
            self.store.record_turn(session)
        envelope = {
            "session_id": session.session_id,
            "reply": response.text,
            "source": response.source,
        }
        if response.intent is not None:
            envelope["intent"] = response.intent
        if debug:
            envelope["trace"] = trace_to_dict(text, response, trace)
        return envelope

    def history(self, session_id: str) -> list[dict]:
        session = self.store.get(session_id)
        if session is None:
            raise UnknownSession(session_id)
        return [
            {"question": t.question, "reply": t.reply, "source": t.source,
             "timestamp": t.timestamp}
            for t in session.history
        ]


def create_app(service: AssistantService) -> FastAPI:
    """FastAPI app exposing the three endpoints of the wire contract."""
    app = FastAPI(title="shopassist")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    @app.get("/healthz")
    def healthz():
        return JSONResponse({"status": "ok"})

    @app.post("/v1/message")
    async def message(request: Request, debug: int = 0):
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="body must be JSON")
        text = body.get("text", "")
        session_id = body.get("session_id")
        try:
            envelope = service.handle_message(text, session_id, debug=bool(debug))
        except EmptyText:
            raise HTTPException(status_code=400, detail="text must be non-empty")
        except UnknownSession:
            raise HTTPException(status_code=404, detail="unknown session_id")
        return JSONResponse(envelope)

    @app.get("/v1/session/{session_id}")
    def session_history(session_id: str):
        try:
            turns = service.history(session_id)
        except UnknownSession:
            raise HTTPException(status_code=404, detail="unknown session_id")
        return JSONResponse({"session_id": session_id, "turns": turns})

    return app


def start_server(config) -> None:
    """Load every engine (fail fast naming any missing artifact), then serve."""
    import uvicorn

    from .appconfig import build_engines

    engines, router_config = build_engines(config)
    store = SessionStore(journal_path=config.journal_path or None)
    service = AssistantService(Router(engines, router_config), store)
    app = create_app(service)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
