"""FastAPI app factory for the interpretation service.

One in-memory session per process. The interpret pipeline is
predict -> spans_from_tags -> build_command -> apply_command; any failure
along the way comes back in-band with HTTP 200 and the session state stays
exactly as it was. Only oversize text (413) and malformed bodies (400) use
error status codes. The model is whatever callable the factory is given, so
tests can drive the service with a stub instead of trained weights.
"""

from __future__ import annotations

import threading
from typing import Callable

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..encoding import INTENT_NAMES, TAG_NAMES, NonAsciiChar
from ..interpreter import (
    CommandError,
    Registry,
    build_command,
    command_to_dict,
    spans_from_tags,
)
from ..models import Prediction
from .schemas import (
    HealthOut,
    InterpretRequest,
    InterpretResponse,
    RegistryOut,
    StateOut,
)
from .state import AmbiguousChart, TradingState, UnknownChart, apply_command

MAX_TEXT_CHARS = 512

PredictFn = Callable[[str], Prediction]


class _Session:
    """Single mutable slot guarded by a lock; handlers run in a threadpool."""

    def __init__(self):
        self.state = TradingState()
        self.lock = threading.Lock()


def _error_body(kind: str, message: str) -> dict:
    return {"type": kind, "message": message}


def create_app(predict_fn: PredictFn, registry: Registry,
               fingerprint: str = "unversioned") -> FastAPI:
    """Wire the endpoints around one predictor, one registry, one session.

    predict_fn maps ASCII text to a Prediction. A predictor without an
    intent head yields intent NONE at confidence 0.0, which builds NoOp; the
    service stays usable for tag inspection.
    """
    app = FastAPI(title="trading command interpreter")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    session = _Session()

    @app.exception_handler(RequestValidationError)
    def malformed_body(request, exc):  # spec says 400, not FastAPI's 422
        return JSONResponse(
            status_code=400,
            content={"error": _error_body("MalformedBody", str(exc))},
        )

    def respond(text: str, intent: str, confidence: float, spans, command,
                error, state: TradingState) -> dict:
        return {
            "text": text,
            "intent": intent,
            "confidence": confidence,
            "spans": [
                {
                    "tag": TAG_NAMES[s.tag],
                    "text": s.text,
                    "start": s.start,
                    "end": s.end,
                }
                for s in spans
            ],
            "command": command,
            "error": error,
            "state": state.to_dict(),
        }

    @app.post("/api/interpret", response_model=InterpretResponse)
    def interpret(req: InterpretRequest):
        text = req.text
        if len(text) > MAX_TEXT_CHARS:
            return JSONResponse(
                status_code=413,
                content={
                    "error": _error_body(
                        "PayloadTooLarge",
                        f"text is {len(text)} chars, limit {MAX_TEXT_CHARS}",
                    )
                },
            )
        for pos, ch in enumerate(text):
            if ord(ch) >= 128:  # enforce the ASCII precondition at the boundary
                exc = NonAsciiChar(pos, ch)
                return respond(
                    text, "NONE", 0.0, [], None,
                    _error_body("NonAsciiChar", str(exc)), session.state,
                )
        pred = predict_fn(text)

        if pred.intent_probs is None:
            intent_id, confidence = 0, 0.0
        else:
            intent_id = pred.intent
            confidence = float(pred.intent_probs[intent_id])
        intent_name = INTENT_NAMES[intent_id]
        spans = spans_from_tags(text, pred.tags)

        try:
            cmd = build_command(intent_id, spans, registry)
        except CommandError as exc:
            return respond(
                text, intent_name, confidence, spans, None,
                _error_body(type(exc).__name__, str(exc)), session.state,
            )

        with session.lock:
            try:
                session.state = apply_command(session.state, cmd)
            except (UnknownChart, AmbiguousChart) as exc:
                return respond(
                    text, intent_name, confidence, spans, None,
                    _error_body(type(exc).__name__, str(exc)), session.state,
                )
            snapshot = session.state
        return respond(
            text, intent_name, confidence, spans, command_to_dict(cmd),
            None, snapshot,
        )

    @app.get("/api/state", response_model=StateOut)
    def get_state():
        with session.lock:
            return session.state.to_dict()

    @app.post("/api/reset", response_model=StateOut)
    def reset():
        with session.lock:
            session.state = TradingState()
            return session.state.to_dict()

    @app.get("/api/registry", response_model=RegistryOut)
    def get_registry():
        return {
            "indicators": list(registry.indicators),
            "tickers": list(registry.tickers),
            "companies": dict(registry.companies),
            "max_distance": registry.max_distance,
        }

    @app.get("/api/health", response_model=HealthOut)
    def health():
        return {"status": "ok", "model_fingerprint": fingerprint}

    return app
