"""Service configuration.

Everything the app factory needs is collected here so that tests can build
configured apps without touching argv or the environment.
"""

from __future__ import annotations

from dataclasses import dataclass

MODES = ("mock", "real")
TTS_BACKENDS = ("openai_api", "speecht5_vectors")

DEFAULT_EMBED_MODEL_ID = "microsoft/deberta-large-mnli"


class SidecarStartupError(Exception):
    """The service cannot start as configured (missing keys, weights, deps)."""


@dataclass
class SidecarConfig:
    mode: str = "mock"
    tts_backend: str = "speecht5_vectors"
    embed_model_id: str = DEFAULT_EMBED_MODEL_ID
    # which hidden layer feeds the word vectors in real mode; -1 = final
    embed_layer: int = -1
    host: str = "127.0.0.1"
    port: int = 8077

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise SidecarStartupError(
                f"unknown mode {self.mode!r} (expected one of {', '.join(MODES)})"
            )
        if self.tts_backend not in TTS_BACKENDS:
            raise SidecarStartupError(
                f"unknown tts backend {self.tts_backend!r} "
                f"(expected one of {', '.join(TTS_BACKENDS)})"
            )
        if not (0 < self.port < 65536):
            raise SidecarStartupError(f"port out of range: {self.port}")
