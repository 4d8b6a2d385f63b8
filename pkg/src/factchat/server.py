"""HTTP service exposing live chat, per-turn traces, and a server-sent-event
channel that reports stage completions while a turn is in flight.

Endpoints: POST /sessions, POST /sessions/{id}/messages (+ /stream for SSE),
GET /sessions/{id}/trace/{n}, GET /healthz. Sessions are in-memory only and
expire after an idle TTL; conversation logs persist, live sessions do not.
"""

from __future__ import annotations

import json
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException
from fastapi.responses import RedirectResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .model import ConversationLog, ConversationState
from .pipeline import ChatEngine, StageError

DEFAULT_MAX_SESSIONS = 100
DEFAULT_SESSION_TTL_S = 30 * 60.0


class MessageIn(BaseModel):
    utterance: str


@dataclass
class SessionRecord:
    session_id: str
    state: ConversationState
    created_at: float
    last_active: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self, max_sessions: int, ttl_s: float, clock: Callable[[], float]) -> None:
        self.max_sessions = max_sessions
        self.ttl_s = ttl_s
        self.clock = clock
        self._sessions: dict[str, SessionRecord] = {}
        self._lock = threading.Lock()

    def _prune(self) -> None:
        now = self.clock()
        dead = [sid for sid, s in self._sessions.items() if now - s.last_active > self.ttl_s]
        for sid in dead:
            del self._sessions[sid]

    def create(self) -> SessionRecord:
        with self._lock:
            self._prune()
            if len(self._sessions) >= self.max_sessions:
                raise HTTPException(status_code=429, detail="session capacity exceeded")
            sid = uuid.uuid4().hex
            record = SessionRecord(sid, ConversationState(), self.clock(), self.clock())
            self._sessions[sid] = record
            return record

    def get(self, session_id: str) -> SessionRecord:
        with self._lock:
            self._prune()
            record = self._sessions.get(session_id)
            if record is None:
                raise HTTPException(status_code=404, detail="unknown or expired session")
            record.last_active = self.clock()
            return record


def create_app(
    engine: ChatEngine,
    max_sessions: int = DEFAULT_MAX_SESSIONS,
    session_ttl_s: float = DEFAULT_SESSION_TTL_S,
    clock: Callable[[], float] = time.monotonic,
    log_path: str | None = None,
    static_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="factchat", version="0.1.0")
    store = SessionStore(max_sessions, session_ttl_s, clock)
    log = ConversationLog(log_path) if log_path else None
    log_lock = threading.Lock()

    def run_locked_turn(record: SessionRecord, utterance: str, on_stage=None):
        # one in-flight turn per session; later posts wait here
        with record.lock:
            turn_index = len(record.state.turns)
            final, trace = engine.run_turn(record.state, utterance, on_stage=on_stage)
            if log is not None:
                with log_lock:
                    log.append(record.session_id, turn_index, record.state.turns[-1])
            record.last_active = clock()
            return turn_index, final, trace

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session():
        record = store.create()
        return {"session_id": record.session_id}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, message: MessageIn):
        if not message.utterance.strip():
            raise HTTPException(status_code=400, detail="utterance must be non-empty")
        record = store.get(session_id)
        try:
            turn_index, final, trace = run_locked_turn(record, message.utterance)
        except StageError as exc:
            raise HTTPException(status_code=502, detail={"stage": exc.stage, "message": str(exc)})
        return {"turn_index": turn_index, "final": final, "trace": trace.to_dict()}

    @app.get("/sessions/{session_id}/trace/{turn_index}")
    def get_trace(session_id: str, turn_index: int):
        record = store.get(session_id)
        if turn_index < 0 or turn_index >= len(record.state.turns):
            raise HTTPException(status_code=404, detail="turn index out of range")
        trace = record.state.turns[turn_index].trace
        if trace is None:
            raise HTTPException(status_code=404, detail="turn has no trace")
        return trace.to_dict()

    @app.post("/sessions/{session_id}/messages/stream")
    def post_message_stream(session_id: str, message: MessageIn):
        if not message.utterance.strip():
            raise HTTPException(status_code=400, detail="utterance must be non-empty")
        record = store.get(session_id)
        events: queue.Queue = queue.Queue()

        def worker() -> None:
            try:
                turn_index, final, _ = run_locked_turn(
                    record, message.utterance, on_stage=lambda s: events.put(("stage", s))
                )
                events.put(("final", final))
                events.put(("turn_index", str(turn_index)))
            except StageError as exc:
                events.put(("error", json.dumps({"stage": exc.stage, "message": str(exc)})))
            except Exception as exc:  # noqa: BLE001 - surfaced to the client
                events.put(("error", json.dumps({"stage": None, "message": str(exc)})))
            finally:
                events.put(None)

        threading.Thread(target=worker, daemon=True).start()

        def sse():
            while True:
                item = events.get()
                if item is None:
                    break
                name, payload = item
                data = "\n".join(f"data: {line}" for line in payload.splitlines()) or "data:"
                yield f"event: {name}\n{data}\n\n"

        return StreamingResponse(sse(), media_type="text/event-stream")

    if static_dir and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

        @app.get("/")
        def index():
            return RedirectResponse(url="/ui/")

    return app
