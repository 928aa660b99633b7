"""HTTP chat API.

Endpoints:
  POST /api/chat                {"sender", "message"} -> [{"text": ...}, ...]
  POST /api/chat?debug=1        {"responses": [...], "debug": {...}}
  GET  /api/health              {"status": "ok", "model_version": ...}
  GET  /api/sessions/{id}/events

The request body is parsed by hand so the error contract stays exact:
400 for malformed JSON or a missing/mistyped field, 422 for a message with
no content, 503 before a model is loaded, 500 with an opaque id otherwise
(the traceback goes to the server log, never to the client).
"""
from __future__ import annotations

import json
import logging
import uuid
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .errors import EmptyMessage, EngineNotReady

logger = logging.getLogger("farm_assistant.server")


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse({"error": message, **extra}, status_code=status)


def create_app(engine=None) -> FastAPI:
    """Engine may be None (still loading / test rigs): everything but the
    error contract then answers 503."""
    app = FastAPI(title="farm-assistant", docs_url=None, redoc_url=None)
    app.state.engine = engine
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/health")
    def health():
        eng = app.state.engine
        if eng is None:
            return _error(503, "model not loaded")
        return {"status": "ok", "model_version": eng.model_version}

    @app.post("/api/chat")
    async def chat(request: Request):
        eng = app.state.engine
        if eng is None:
            return _error(503, "model not loaded")
        try:
            payload = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _error(400, "request body is not valid JSON")
        if not isinstance(payload, dict):
            return _error(400, "request body must be a JSON object")
        sender = payload.get("sender")
        message = payload.get("message")
        if not isinstance(sender, str) or not sender:
            return _error(400, "field 'sender' must be a non-empty string")
        if not isinstance(message, str):
            return _error(400, "field 'message' must be a string")
        if not message.strip():
            return _error(422, "message has no content")

        try:
            result = eng.handle_detailed(sender, message)
        except EmptyMessage:
            return _error(422, "message has no content")
        except EngineNotReady:
            return _error(503, "model not loaded")
        except Exception:
            incident = uuid.uuid4().hex[:8]
            logger.exception("chat request failed (incident %s)", incident)
            return _error(500, "internal error", id=incident)

        responses = [{"text": t} for t in result.responses]
        if request.query_params.get("debug") == "1":
            return {
                "responses": responses,
                "debug": {
                    "intent": result.intent,
                    "ranking": [[name, float(c)] for name, c in result.ranking],
                    "entities": [{"entity": e.entity, "value": e.value,
                                  "surface": e.surface, "start": e.start,
                                  "end": e.end} for e in result.entities],
                    "actions": list(result.actions),
                },
            }
        return responses

    @app.get("/api/sessions/{session_id}/events")
    def session_events(session_id: str):
        eng = app.state.engine
        if eng is None:
            return _error(503, "model not loaded")
        with eng.store.lock(session_id):
            tracker = eng.store.get(session_id)
            events = [e.to_dict() for e in tracker.events]
        return {"session_id": session_id, "events": events}

    return app


def http_serve(engine, host: str = "127.0.0.1", port: int = 8000,
               log_level: str = "info") -> None:
    import uvicorn

    uvicorn.run(create_app(engine), host=host, port=port, log_level=log_level)
