"""Command-line entry point: `python -m model_sidecar`."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from model_sidecar.app import create_app
from model_sidecar.config import (
    DEFAULT_EMBED_MODEL_ID,
    MODES,
    TTS_BACKENDS,
    SidecarConfig,
    SidecarStartupError,
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="model-sidecar", description=__doc__)
    p.add_argument("--mode", choices=MODES, default="mock")
    p.add_argument("--tts-backend", choices=TTS_BACKENDS, default="speecht5_vectors")
    p.add_argument("--embed-model", default=DEFAULT_EMBED_MODEL_ID)
    p.add_argument("--embed-layer", type=int, default=-1,
                   help="hidden layer used for word vectors in real mode")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = SidecarConfig(
            mode=args.mode,
            tts_backend=args.tts_backend,
            embed_model_id=args.embed_model,
            embed_layer=args.embed_layer,
            host=args.host,
            port=args.port,
        )
        app = create_app(config)
    except SidecarStartupError as e:
        print(f"model-sidecar: {e}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
