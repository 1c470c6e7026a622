"""HTTP surface of the sidecar.

Success bodies are WAV bytes (/tts) or JSON (/embed, /health). Every error
body has the same shape, {"code": ..., "message": ...}, so clients can
branch on `code` without scraping prose.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

import model_sidecar
from model_sidecar.config import SidecarConfig
from model_sidecar.mock_backends import MockBackends
from model_sidecar.real_backends import BackendFailure

WIRE_FORMAT = "wav16k_mono_pcm16"


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


async def _json_body(request: Request) -> dict | JSONResponse:
    try:
        body = await request.json()
    except Exception:
        return _error(400, "bad_request", "request body is not valid JSON")
    if not isinstance(body, dict):
        return _error(400, "bad_request", "request body must be a JSON object")
    return body


def _load_backends(config: SidecarConfig):
    if config.mode == "mock":
        return MockBackends(config.embed_model_id)
    # imported lazily so mock mode never touches torch/transformers
    from model_sidecar.real_backends import RealBackends

    return RealBackends(config)


def create_app(config: SidecarConfig | None = None) -> FastAPI:
    """Build the service; raises SidecarStartupError if real mode cannot load."""
    config = config or SidecarConfig()
    backends = _load_backends(config)

    app = FastAPI(title="model-sidecar", version=model_sidecar.__version__)

    @app.get("/health")
    def health() -> dict:
        return {
            "mode": backends.mode,
            "backends": backends.describe(),
            "model_ids": backends.model_ids(),
        }

    @app.post("/tts")
    async def tts(request: Request):
        body = await _json_body(request)
        if isinstance(body, JSONResponse):
            return body
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            return _error(400, "empty_text", "tts needs non-empty text")
        fmt = body.get("format")
        if fmt != WIRE_FORMAT:
            return _error(
                400, "bad_format", f"unsupported format {fmt!r} (only {WIRE_FORMAT!r})"
            )
        voice = body.get("voice")
        if not isinstance(voice, str) or not backends.knows_voice(voice):
            return _error(422, "unknown_voice", f"unknown voice {voice!r}")
        try:
            wav = backends.tts(text, voice)
        except BackendFailure as e:
            return _error(502, "backend_failure", str(e))
        return Response(content=wav, media_type="audio/wav")

    @app.post("/embed")
    async def embed(request: Request):
        body = await _json_body(request)
        if isinstance(body, JSONResponse):
            return body
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            return _error(400, "empty_text", "embed needs non-empty text")
        model = body.get("model")
        if model is not None and model != backends.embed_model_id:
            return _error(
                503,
                "model_not_loaded",
                f"model {model!r} is not loaded (serving {backends.embed_model_id!r})",
            )
        try:
            result = backends.embed(text)
        except BackendFailure as e:
            return _error(502, "backend_failure", str(e))
        return result

    return app
