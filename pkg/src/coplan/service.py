"""HTTP service for interactive sessions.

Command endpoints create sessions, apply a user action plus the agent's
reply atomically, and expose views and debug snapshots; a server-sent event
stream delivers every committed turn exactly once, in order, with resume by
last-seen index.  Persistence is one append-only log file per session; on
restart the registry replays the logs to reconstruct all open sessions.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from .errors import CoplanError, ModelError, PreconditionError, TurnError, ValidationError
from .strips import Atom
from .planner import SearchBudget
from .modelio import BlockWordsSpec, append_record, read_log
from .session import Session, SessionConfig


# ---------------------------------------------------------------------------
# views


def board_stacks(session: Session) -> list[list[str]]:
    world = session.world
    above = {}
    bottoms = []
    for atom in world:
        if atom.predicate == "on":
            above[atom.args[1]] = atom.args[0]
        elif atom.predicate == "on-table":
            bottoms.append(atom.args[0])
    stacks = []
    for bottom in sorted(bottoms):
        stack = [bottom]
        while stack[-1] in above:
            stack.append(above[stack[-1]])
        stacks.append(stack)
    return stacks


def held_blocks(session: Session) -> dict:
    held = {actor: None for actor in session.config.problem.actors}
    for atom in session.world:
        if atom.predicate == "holding":
            held[atom.args[0]] = atom.args[1]
    return held


def session_view(session_id: str, session: Session) -> dict:
    terminal, satisfied = session.is_terminal()
    cfg = session.config
    return {
        "sessionId": session_id,
        "stacks": board_stacks(session),
        "held": held_blocks(session),
        "turn": session.turn_owner,
        "turnCounter": session.turn_counter,
        "terminal": terminal,
        "satisfiedWords": list(satisfied),
        "words": [h.label for h in cfg.hypotheses],
        "legalActions": [
            {"uid": a.uid, "name": a.name, "args": list(a.args), "actor": a.actor}
            for a in session.legal_actions()
        ],
        "config": {
            "tau": cfg.tau,
            "headStart": cfg.head_start,
            "beta": cfg.beta,
            "fallback": cfg.fallback,
            "mode": cfg.mode,
            "seed": cfg.seed,
        },
    }


# ---------------------------------------------------------------------------
# registry


@dataclass
class SessionRuntime:
    session: Session
    lock: threading.RLock = field(default_factory=threading.RLock)
    events: list = field(default_factory=list)
    cond: threading.Condition = field(default_factory=threading.Condition)
    log_path: Optional[Path] = None
    log_fh: Optional[object] = None


class SessionRegistry:
    """All live sessions; one lock per session serializes its commands."""

    def __init__(self, data_dir: Optional[str] = None):
        self.data_dir = Path(data_dir) if data_dir else None
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, SessionRuntime] = {}
        self._registry_lock = threading.Lock()

    # -- lifecycle -------------------------------------------------------

    def create(self, config: SessionConfig, session_id: Optional[str] = None) -> str:
        session_id = session_id or uuid.uuid4().hex[:12]
        runtime = SessionRuntime(session=Session(config))
        if self.data_dir:
            runtime.log_path = self.data_dir / f"{session_id}.log"
            runtime.log_fh = open(runtime.log_path, "w", encoding="utf-8")
            header = runtime.session.log_header()
            runtime.log_fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
            runtime.log_fh.flush()
        with self._registry_lock:
            self._sessions[session_id] = runtime
        return session_id

    def restore(self) -> list[str]:
        """Rebuild sessions from their logs after a restart."""
        if not self.data_dir:
            return []
        restored = []
        for path in sorted(self.data_dir.glob("*.log")):
            session_id = path.stem
            try:
                header, records = read_log(path)
                config = SessionConfig.from_jsonable(header["config"])
                session = Session(config)
                runtime = SessionRuntime(session=session, log_path=path)
                for rec in records:
                    if rec.actor == config.user:
                        session.submit_user_action(rec.action)
                    else:
                        action, _ = session.agent_step()
                        if action.uid != rec.action:
                            raise ModelError(f"log {path} diverges at turn {rec.turn}")
                    self._emit_locked(runtime, session_id)
                runtime.log_fh = open(path, "a", encoding="utf-8")
                with self._registry_lock:
                    self._sessions[session_id] = runtime
                restored.append(session_id)
            except CoplanError:
                continue  # unreadable or diverging log: leave the file alone
        return restored

    def _runtime(self, session_id: str) -> SessionRuntime:
        with self._registry_lock:
            runtime = self._sessions.get(session_id)
        if runtime is None:
            raise KeyError(session_id)
        return runtime

    def ids(self) -> list[str]:
        with self._registry_lock:
            return sorted(self._sessions)

    # -- events ----------------------------------------------------------

    def _emit_locked(self, runtime: SessionRuntime, session_id: str):
        """Append one event per freshly committed turn (caller holds the lock)."""
        session = runtime.session
        while len(runtime.events) < len(session.records):
            idx = len(runtime.events)
            record = session.records[idx]
            event = {
                "index": idx + 1,
                "type": "turn",
                "record": json.loads(record.to_json()),
                "view": session_view(session_id, session),
                "snapshot": session.debug_snapshot(),
            }
            runtime.events.append(event)
            if runtime.log_fh:
                append_record(runtime.log_fh, record)
        with runtime.cond:
            runtime.cond.notify_all()

    def events_since(self, session_id: str, since: int) -> list:
        runtime = self._runtime(session_id)
        with runtime.lock:
            return runtime.events[since:]

    def wait_events(self, session_id: str, since: int, timeout: float) -> list:
        runtime = self._runtime(session_id)
        events = self.events_since(session_id, since)
        if events:
            return events
        with runtime.cond:
            runtime.cond.wait(timeout)
        return self.events_since(session_id, since)

    # -- commands ----------------------------------------------------------

    def view(self, session_id: str) -> dict:
        runtime = self._runtime(session_id)
        with runtime.lock:
            return session_view(session_id, runtime.session)

    def debug(self, session_id: str) -> dict:
        runtime = self._runtime(session_id)
        with runtime.lock:
            return runtime.session.debug_snapshot()

    def quit(self, session_id: str) -> dict:
        runtime = self._runtime(session_id)
        with runtime.lock:
            runtime.session.quit()
            with runtime.cond:
                runtime.cond.notify_all()
            return session_view(session_id, runtime.session)

    def post_action(self, session_id: str, name: str, args: list, debug: bool = False) -> dict:
        """Apply the user action and the agent's reply as one atomic turn."""
        runtime = self._runtime(session_id)
        with runtime.lock:
            session = runtime.session
            action = session.resolve_action(name, args)
            verdict = session.submit_user_action(action)
            self._emit_locked(runtime, session_id)
            agent_action = None
            if not session.terminal:
                agent_action, _ = session.agent_step()
                self._emit_locked(runtime, session_id)
            result = {
                "verdict": verdict.as_dict(),
                "userAction": action.uid,
                "agentAction": agent_action.uid if agent_action else None,
                "view": session_view(session_id, session),
            }
            if debug:
                result["debug"] = session.debug_snapshot()
            return result

    def close(self):
        with self._registry_lock:
            for runtime in self._sessions.values():
                if runtime.log_fh:
                    runtime.log_fh.close()
                    runtime.log_fh = None


# ---------------------------------------------------------------------------
# request payloads


class BlockWordsPayload(BaseModel):
    stacks: list[list[str]]
    words: list[str]
    actors: list[str] = ["user", "agent"]


class CreateSessionRequest(BaseModel):
    domain: str = "blockwords-demo"
    blockwords: Optional[BlockWordsPayload] = None
    tau: float = 0.5
    headStart: int = 0
    beta: float = 1.0
    fallback: str = "noop"
    mode: str = "optimal"
    budgetNodes: int = 200_000
    budgetMs: float = 20_000.0
    seed: int = 0
    trueGoal: Optional[str] = None
    finishWhenSatisfied: bool = True


class ActionRequest(BaseModel):
    name: str
    args: list[str] = Field(default_factory=list)
    debug: bool = False


def config_from_request(req: CreateSessionRequest) -> SessionConfig:
    if req.blockwords is not None:
        spec = BlockWordsSpec(
            stacks=tuple(tuple(s) for s in req.blockwords.stacks),
            words=tuple(req.blockwords.words),
            actors=tuple(req.blockwords.actors),
        )
    elif req.domain == "blockwords-demo":
        spec = None  # built-in layout
    else:
        raise ValidationError(f"unknown domain {req.domain!r}")
    return SessionConfig.blockwords(
        spec=spec,
        tau=req.tau,
        head_start=req.headStart,
        beta=req.beta,
        fallback=req.fallback,
        mode=req.mode,
        budget=SearchBudget(req.budgetNodes, req.budgetMs),
        seed=req.seed,
        true_goal=req.trueGoal,
        finish_when_satisfied=req.finishWhenSatisfied,
    )


# ---------------------------------------------------------------------------
# application


def _sse_frame(event: dict) -> str:
    data = json.dumps(event, sort_keys=True, separators=(",", ":"))
    return f"id: {event['index']}\nevent: {event['type']}\ndata: {data}\n\n"


def create_app(registry: Optional[SessionRegistry] = None, heartbeat: float = 15.0) -> FastAPI:
    registry = registry or SessionRegistry()
    app = FastAPI(title="coplan", version="0.1.0")
    app.state.registry = registry
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        try:
            config = config_from_request(req)
        except (ValidationError, ModelError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        session_id = registry.create(config)
        return {"sessionId": session_id, "view": registry.view(session_id)}

    @app.get("/sessions")
    def list_sessions():
        out = []
        for session_id in registry.ids():
            view = registry.view(session_id)
            out.append(
                {
                    "sessionId": session_id,
                    "turnCounter": view["turnCounter"],
                    "terminal": view["terminal"],
                }
            )
        return {"sessions": out}

    @app.get("/sessions/{session_id}")
    def get_view(session_id: str):
        try:
            return registry.view(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.get("/sessions/{session_id}/debug")
    def get_debug(session_id: str):
        try:
            return registry.debug(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.post("/sessions/{session_id}/actions")
    def post_action(session_id: str, req: ActionRequest):
        try:
            return registry.post_action(session_id, req.name, req.args, req.debug)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        except (TurnError, PreconditionError) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ModelError as exc:
            raise HTTPException(status_code=409, detail=f"illegal action: {exc}")

    @app.post("/sessions/{session_id}/quit")
    def quit_session(session_id: str):
        try:
            return registry.quit(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.get("/sessions/{session_id}/events")
    def events(session_id: str, since: int = 0, request: Request = None):
        def stream():
            try:
                registry.view(session_id)
            except KeyError:
                payload = json.dumps({"error": f"unknown session {session_id}"})
                yield f"event: error\ndata: {payload}\n\n"
                return
            cursor = since
            while True:
                batch = registry.wait_events(session_id, cursor, timeout=heartbeat)
                for event in batch:
                    yield _sse_frame(event)
                    cursor = event["index"]
                view = registry.view(session_id)
                if view["terminal"] and not registry.events_since(session_id, cursor):
                    payload = json.dumps({"index": cursor, "terminal": True})
                    yield f"event: end\ndata: {payload}\n\n"
                    return
                if not batch:
                    yield ": heartbeat\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
