"""The HTTP service: POST /v1/direction and /v1/termination.

Request and response bodies follow the navvlm wire protocol.  Handlers
are stateless; the backend call is serialized behind a lock so a
single-accelerator model stays correct under concurrent requests.
Malformed bodies answer 400, per-request backend failures answer 503.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, model_validator

from .config import BridgeConfig
from .model import ModelClient, ModelError, resolve_model
from .prompts import DIRECTION, TERMINATION, build_prompt
from .vocabulary import advisory_guidance, advisory_verdict


class WireSnapshot(BaseModel):
    ranges: list[float]
    fov: float = Field(gt=0.0)
    visible_labels: list[str]


class WireRequest(BaseModel):
    goal: str = Field(min_length=1)
    prompt: str
    image_b64: str | None = None
    snapshot: WireSnapshot | None = None
    step: int = Field(ge=0)

    @model_validator(mode="after")
    def _exactly_one_payload(self) -> "WireRequest":
        if (self.image_b64 is None) == (self.snapshot is None):
            raise ValueError(
                "exactly one of image_b64 / snapshot must be provided")
        return self


def create_app(config: BridgeConfig | None = None,
               model: ModelClient | None = None) -> FastAPI:
    """Build the service around ``config``.

    Raises ModelLoadError when the configured backend cannot be brought
    up, so a broken deployment refuses to start instead of serving 503s.
    Tests may inject a ``model`` directly.
    """
    config = config or BridgeConfig()
    if model is None:
        model = resolve_model(config.model)
    model_lock = threading.Lock()
    app = FastAPI(title="navvlm-bridge")

    @app.exception_handler(RequestValidationError)
    async def _malformed_body(request, exc):
        return JSONResponse(status_code=400,
                            content={"detail": jsonable_encoder(exc.errors())})

    def respond(kind: str, req: WireRequest) -> dict:
        if req.prompt != kind:
            raise HTTPException(
                status_code=400,
                detail=f"prompt kind {req.prompt!r} does not match "
                       f"endpoint /v1/{kind}")
        prompt = build_prompt(kind, req.goal, config)
        snapshot = req.snapshot.model_dump() if req.snapshot else None
        try:
            with model_lock:
                raw_text, latency_ms = model.answer(
                    kind, prompt, req.goal, req.image_b64, snapshot)
        except ModelError as exc:
            raise HTTPException(status_code=503,
                                detail=f"model failed to answer: {exc}")
        body = {"raw_text": raw_text, "latency_ms": latency_ms}
        if kind == DIRECTION:
            body["guidance"] = advisory_guidance(raw_text)
        else:
            body["verdict"] = advisory_verdict(raw_text)
        return body

    @app.post("/v1/direction")
    def direction(req: WireRequest) -> dict:
        return respond(DIRECTION, req)

    @app.post("/v1/termination")
    def termination(req: WireRequest) -> dict:
        return respond(TERMINATION, req)

    return app
