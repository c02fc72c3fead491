"""HTTP session service for live elicitation.

A session walks one user down the question tree for her history: create a
session, read the current question, post yes/no answers, and collect the
recommended strategy when the walk reaches a leaf.  Clusterings and trees
are built on demand per history and cached (build everything up front
with ``warm=True``); sessions live in an in-process store with optional
JSON snapshots.

All ids are strings on the wire; errors are ``{code, message}`` bodies.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .cluster import Clustering, hac
from .model import DecisionModel, best_strategy
from .tree import DEFAULT_GAMMA, ElicitationTree, build_tree, FEATURE
from .utility import UtilityDatabase

IN_PROGRESS = "IN_PROGRESS"
COMPLETE = "COMPLETE"


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _not_found(code, message):
    return ServiceError(404, code, message)


class TreeBank:
    """Per-history clustering + tree, built once and shared."""

    def __init__(self, db: UtilityDatabase, model: DecisionModel, k: int, gamma: float):
        self.db = db
        self.model = model
        self.k = k
        self.gamma = gamma
        self._built: dict[int, tuple[Clustering, ElicitationTree]] = {}
        self._lock = threading.Lock()

    def get(self, h: int) -> tuple[Clustering, ElicitationTree]:
        hit = self._built.get(h)
        if hit is not None:
            return hit
        with self._lock:
            hit = self._built.get(h)
            if hit is None:
                clustering = hac(self.db, self.model, h, self.k)
                tree = build_tree(self.db, clustering, self.model, self.gamma)
                hit = (clustering, tree)
                self._built[h] = hit
            return hit

    def warm(self):
        for h in range(self.model.num_histories):
            self.get(h)


@dataclass
class Session:
    session_id: str
    history_id: int
    answers: list[bool] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class SessionStore:
    """In-process session map with optional file snapshots."""

    def __init__(self, snapshot_path=None):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._snapshot_path = snapshot_path
        if snapshot_path and os.path.exists(snapshot_path):
            with open(snapshot_path) as fh:
                for entry in json.load(fh):
                    s = Session(entry["session_id"], int(entry["history_id"]),
                                [bool(a) for a in entry["answers"]])
                    self._sessions[s.session_id] = s

    def create(self, history_id: int) -> Session:
        session = Session(secrets.token_hex(12), history_id)
        with self._lock:
            self._sessions[session.session_id] = session
        self._snapshot()
        return session

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise _not_found("unknown_session", f"no session {session_id!r}")
        return session

    def _snapshot(self):
        if not self._snapshot_path:
            return
        with self._lock:
            payload = [{"session_id": s.session_id, "history_id": s.history_id,
                        "answers": list(s.answers)}
                       for s in self._sessions.values()]
        tmp = f"{self._snapshot_path}.tmp"
        with open(tmp, "w") as fh:
            json.dump(payload, fh)
        os.replace(tmp, self._snapshot_path)

    def mutated(self):
        self._snapshot()


class AnswerBody(BaseModel):
    answer: bool


class CreateBody(BaseModel):
    history_id: str


def _question_json(model: DecisionModel, question) -> dict:
    base = {"kind": question.kind, "text": question.text,
            "outcome_i": _outcome_json(model, question.outcome_i)}
    if question.kind == FEATURE:
        c = question.threshold
        base["lottery"] = {
            "p_best": c,
            "p_worst": 1.0 - c,
            "best_outcome": _outcome_json(model, model.best_anchor),
            "worst_outcome": _outcome_json(model, model.worst_anchor),
        }
    else:
        base["outcome_j"] = _outcome_json(model, question.outcome_j)
    return base


def _outcome_json(model, oid: int) -> dict:
    o = model.outcomes[oid]
    return {"id": str(o.id), "label": o.label, "question_text": o.question_text}


def create_app(model: DecisionModel, db: UtilityDatabase, *, k: int,
               gamma: float = DEFAULT_GAMMA, warm: bool = False,
               snapshot_path=None, static_dir=None) -> FastAPI:
    app = FastAPI(title="utilicit session service")
    bank = TreeBank(db, model, k, gamma)
    store = SessionStore(snapshot_path)
    app.state.bank = bank
    app.state.store = store
    if warm:
        bank.warm()

    def replay(session: Session):
        """Walk the tree along the recorded answers; returns (node, transcript)."""
        _, tree = bank.get(session.history_id)
        node = tree.root
        transcript = []
        for reply in session.answers:
            if node.is_leaf:
                raise ServiceError(500, "corrupt_session",
                                   "session has more answers than the tree has depth")
            transcript.append((node.question, reply))
            node = node.yes if reply else node.no
        return node, transcript

    def session_json(session: Session) -> dict:
        _, tree = bank.get(session.history_id)
        node, transcript = replay(session)
        history = model.histories[session.history_id]
        payload = {
            "session_id": session.session_id,
            "history_id": str(history.id),
            "history_label": history.label,
            "status": COMPLETE if node.is_leaf else IN_PROGRESS,
            "questions_answered": len(transcript),
            "max_questions": tree.depth,
            "transcript": [{"question": _question_json(model, q), "answer": a}
                           for q, a in transcript],
            "question": None,
            "result": None,
        }
        if node.is_leaf:
            proto = db[db.index_of(node.prototype_id)]
            sid, eu = best_strategy(model, proto, session.history_id)
            strategy = model.strategies[sid]
            payload["result"] = {
                "cluster_label": str(node.label),
                "prototype_id": node.prototype_id,
                "prototype_values": proto.values.tolist(),
                "strategy": {"id": str(strategy.id), "label": strategy.label,
                             "description": strategy.description},
                "expected_utility": eu,
            }
        else:
            payload["question"] = _question_json(model, node.question)
        return payload

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422,
                            content={"code": "validation_error", "message": str(exc)})

    @app.get("/model")
    def get_model():
        return {
            "outcomes": [_outcome_json(model, o.id) for o in model.outcomes],
            "histories": [{"id": str(h.id), "label": h.label, "prior": h.prior}
                          for h in model.histories],
            "strategies": [{"id": str(s.id), "label": s.label, "description": s.description}
                           for s in model.strategies],
            "best_anchor": str(model.best_anchor),
            "worst_anchor": str(model.worst_anchor),
        }

    @app.get("/trees/{history_id}")
    def get_tree(history_id: str):
        h = _parse_history(history_id)
        _, tree = bank.get(h)
        return tree.to_dict()

    def _parse_history(raw: str) -> int:
        try:
            h = int(raw)
        except ValueError:
            raise _not_found("unknown_history", f"no history {raw!r}")
        if not 0 <= h < model.num_histories:
            raise _not_found("unknown_history", f"no history {raw!r}")
        return h

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateBody):
        h = _parse_history(body.history_id)
        session = store.create(h)
        return session_json(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return session_json(store.get(session_id))

    @app.get("/sessions/{session_id}/question")
    def get_question(session_id: str):
        session = store.get(session_id)
        node, _ = replay(session)
        if node.is_leaf:
            raise ServiceError(409, "session_complete",
                               "session is complete; no question to answer")
        return _question_json(model, node.question)

    @app.post("/sessions/{session_id}/answer")
    def submit_answer(session_id: str, body: AnswerBody):
        session = store.get(session_id)
        if not session.lock.acquire(blocking=False):
            raise ServiceError(409, "conflict", "another answer is in flight")
        try:
            node, _ = replay(session)
            if node.is_leaf:
                raise ServiceError(409, "session_complete",
                                   "session is already complete")
            session.answers.append(bool(body.answer))
            store.mutated()
            return session_json(session)
        finally:
            session.lock.release()

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="static")

    return app
