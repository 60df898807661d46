"""HTTP session service for interactive human-in-the-loop refinement.

Sessions persist as one JSON file each (write-then-rename). A file
stores only the session's inputs and the update history; because the
loop is deterministic, reloading replays that history and reproduces
the exact state, so a crash between requests loses nothing.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import GrammarError, IntentLoopError
from .feedback import FeedbackReport
from .generator import render_svg
from .loop import (
    RefinementConfig,
    SessionState,
    config_digest,
    default_policy,
    derive_updates,
    iterate_once,
    policy_context,
    record_iteration,
    start_session,
)
from .presets import PresetBundle, load_presets
from .prompts import DefaultsTable
from .seeding import mix
from .updates import UpdateSignal, prompt_edit
from .vocab import Vocabulary, load_vocabulary


class ServiceError(IntentLoopError):
    def __init__(self, status: int, code: str, message: str, detail=None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.detail = detail


@dataclass
class Session:
    session_id: str
    created_at: float
    prompt: str
    preset: str
    seed: int
    state: SessionState
    records: list
    updates_history: list[list[dict]] = field(default_factory=list)

    @property
    def status(self) -> str:
        if self.state.report.satisfied:
            return "satisfied"
        return "active"

    def terminal_status(self, max_iterations: int) -> str:
        if self.state.report.satisfied:
            return "satisfied"
        if self.state.k >= max_iterations:
            return "budget_exhausted"
        return "active"


class SessionService:
    """Session lifecycle around the refinement loop, with file-backed
    persistence. Per-session mutation is serialized by a lock; distinct
    sessions are independent."""

    def __init__(self, store_dir, bundle: PresetBundle | None = None,
                 vocab: Vocabulary | None = None,
                 defaults_table: DefaultsTable | None = None,
                 seed: int | None = None):
        self.store_dir = Path(store_dir)
        self.store_dir.mkdir(parents=True, exist_ok=True)
        self.bundle = bundle or load_presets()
        self.vocab = vocab or load_vocabulary()
        self.defaults_table = defaults_table
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._seed_rng_state = seed if seed is not None else secrets.randbits(63)
        self._load_store()

    # -- configuration ---------------------------------------------------

    def preset_names(self) -> list[str]:
        return sorted(self.bundle.presets)

    def _config_for(self, preset: str) -> RefinementConfig:
        if preset not in self.bundle.presets:
            raise ServiceError(404, "unknown_preset",
                               f"no preset named {preset!r}",
                               detail={"available": self.preset_names()})
        return RefinementConfig(
            generator=self.bundle.preset(preset),
            detector=self.bundle.detector(preset),
            max_iterations=self.bundle.max_iterations,
            policy=default_policy(self.bundle.max_signals_per_iteration),
            defaults_table=self.defaults_table,
            vocab=self.vocab,
        )

    def _next_seed(self) -> int:
        with self._registry_lock:
            self._seed_rng_state = mix(self._seed_rng_state, "session-seed")
            return self._seed_rng_state % (1 << 63)

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    # -- persistence -----------------------------------------------------

    def _path(self, session_id: str) -> Path:
        return self.store_dir / f"{session_id}.json"

    def _persist(self, session: Session):
        payload = {
            "session_id": session.session_id,
            "created_at": session.created_at,
            "prompt": session.prompt,
            "preset": session.preset,
            "seed": session.seed,
            "updates_history": session.updates_history,
        }
        path = self._path(session.session_id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(payload, indent=2))
        os.replace(tmp, path)

    def _load_store(self):
        for path in sorted(self.store_dir.glob("*.json")):
            try:
                payload = json.loads(path.read_text())
                self._sessions[payload["session_id"]] = self._replay(payload)
            except Exception:
                continue  # skip unreadable entries rather than refuse to start

    def _replay(self, payload: dict) -> Session:
        cfg = self._config_for(payload["preset"])
        state = start_session(payload["prompt"], cfg, payload["seed"])
        records = [record_iteration(state, [])]
        for raw_updates in payload["updates_history"]:
            updates = [UpdateSignal.from_dict(u) for u in raw_updates]
            state = iterate_once(state, cfg, updates)
            records.append(record_iteration(state, updates))
        return Session(
            session_id=payload["session_id"],
            created_at=payload["created_at"],
            prompt=payload["prompt"],
            preset=payload["preset"],
            seed=payload["seed"],
            state=state,
            records=records,
            updates_history=payload["updates_history"],
        )

    # -- operations ------------------------------------------------------

    def create_session(self, prompt: str, preset: str,
                       seed: int | None = None) -> dict:
        cfg = self._config_for(preset)
        seed = self._next_seed() if seed is None else int(seed)
        try:
            state = start_session(prompt, cfg, seed)
        except GrammarError as exc:
            raise ServiceError(400, "grammar_error", str(exc),
                               detail={"position": exc.position}) from exc
        except IntentLoopError as exc:
            raise ServiceError(400, "invalid_prompt", str(exc)) from exc
        session = Session(
            session_id=secrets.token_hex(16),
            created_at=time.time(),
            prompt=prompt, preset=preset, seed=seed,
            state=state,
            records=[record_iteration(state, [])],
        )
        with self._registry_lock:
            self._sessions[session.session_id] = session
        self._persist(session)
        return self.session_view(session.session_id)

    def _get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise ServiceError(404, "unknown_session",
                               f"no session {session_id!r}")
        return session

    def iterate(self, session_id: str, accepted_item_ids=None,
                manual_updates=None, prompt_edit_payload=None) -> dict:
        with self._lock_for(session_id):
            session = self._get(session_id)
            cfg = self._config_for(session.preset)
            status = session.terminal_status(cfg.max_iterations)
            if status != "active":
                raise ServiceError(409, "session_terminal",
                                   f"session already {status}")
            updates: list[UpdateSignal] = []
            if prompt_edit_payload:
                updates.append(prompt_edit(prompt_edit_payload, origin="human"))
            for raw in manual_updates or []:
                signal = UpdateSignal.from_dict(raw)
                updates.append(UpdateSignal(signal.kind, "human", signal.payload))
            if accepted_item_ids:
                report = session.state.report
                accepted = []
                for item_id in accepted_item_ids:
                    item = report.item(item_id)
                    if item is None:
                        raise ServiceError(
                            400, "unknown_item",
                            f"item {item_id!r} not in the current report")
                    accepted.append(item)
                updates.extend(derive_updates(
                    FeedbackReport(tuple(accepted)), cfg.policy,
                    policy_context(session.state)))
            try:
                session.state = iterate_once(session.state, cfg, updates)
            except IntentLoopError as exc:
                raise ServiceError(400, "invalid_update", str(exc)) from exc
            session.records.append(record_iteration(session.state, updates))
            session.updates_history.append([u.to_dict() for u in updates])
            self._persist(session)
            return self.session_view(session_id)

    def session_view(self, session_id: str) -> dict:
        session = self._get(session_id)
        cfg = self._config_for(session.preset)
        state = session.state
        return {
            "session_id": session.session_id,
            "created_at": session.created_at,
            "prompt": session.prompt,
            "preset": session.preset,
            "seed": session.seed,
            "status": session.terminal_status(cfg.max_iterations),
            "k": state.k,
            "iterations": len(session.records),
            "canonical_prompt": state.canonical_prompt,
            "report": state.report.to_dict(),
            "render_url": (f"/api/sessions/{session.session_id}"
                           f"/iterations/{state.k}/render.svg"),
            "max_iterations": cfg.max_iterations,
        }

    def trace_document(self, session_id: str) -> dict:
        session = self._get(session_id)
        cfg = self._config_for(session.preset)
        doc = {
            "schema": "trace_v1",
            "prompt": session.prompt,
            "canonical_prompt": session.state.canonical_prompt,
            "config_digest": config_digest(cfg, session.seed),
            "iterations": [rec.to_dict() for rec in session.records],
            "status": session.terminal_status(cfg.max_iterations),
        }
        from .evaluation import evaluate_prompt

        final_eval = evaluate_prompt(session.state.spec, session.state.graph,
                                     session.state.scene)
        doc["final_eval"] = {k: final_eval[k]
                             for k in ("numeracy", "attribute", "spatial")}
        return doc

    def render(self, session_id: str, k: int) -> str:
        session = self._get(session_id)
        if not 0 <= k < len(session.records):
            raise ServiceError(404, "unknown_iteration",
                               f"iteration {k} not in session")
        return render_svg(session.records[k].scene)

    def delete(self, session_id: str):
        with self._lock_for(session_id):
            self._get(session_id)
            with self._registry_lock:
                self._sessions.pop(session_id, None)
            path = self._path(session_id)
            if path.exists():
                path.unlink()

    def list_sessions(self) -> list[dict]:
        return [self.session_view(sid) for sid in sorted(self._sessions)]


def create_app(service: SessionService, frontend_dir=None):
    """FastAPI application exposing the session endpoints; errors come
    back as JSON {code, message, detail?}."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse, Response

    app = FastAPI(title="intentloop session service", docs_url=None,
                  redoc_url=None)

    @app.exception_handler(ServiceError)
    async def handle_service_error(request: Request, exc: ServiceError):
        body = {"code": exc.code, "message": str(exc)}
        if exc.detail is not None:
            body["detail"] = exc.detail
        return JSONResponse(status_code=exc.status, content=body)

    @app.get("/api/presets")
    def get_presets():
        return {"presets": service.preset_names()}

    @app.get("/api/sessions")
    def get_sessions():
        return {"sessions": service.list_sessions()}

    @app.post("/api/sessions", status_code=201)
    def post_session(body: dict):
        prompt = body.get("prompt", "")
        preset = body.get("preset", "refined")
        return service.create_session(prompt, preset, body.get("seed"))

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return service.session_view(session_id)

    @app.post("/api/sessions/{session_id}/iterate")
    def post_iterate(session_id: str, body: dict | None = None):
        body = body or {}
        return service.iterate(
            session_id,
            accepted_item_ids=body.get("accepted_item_ids"),
            manual_updates=body.get("manual_updates"),
            prompt_edit_payload=body.get("prompt_edit"),
        )

    @app.get("/api/sessions/{session_id}/iterations/{k}/render.svg")
    def get_render(session_id: str, k: int):
        svg = service.render(session_id, k)
        return Response(content=svg, media_type="image/svg+xml")

    @app.get("/api/sessions/{session_id}/trace")
    def get_trace(session_id: str):
        return service.trace_document(session_id)

    @app.delete("/api/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        service.delete(session_id)
        return Response(status_code=204)

    if frontend_dir and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True),
                  name="frontend")
    return app
