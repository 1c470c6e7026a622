"""The /health surface, config validation, and real-mode startup refusal."""

import pytest

from model_sidecar.config import SidecarConfig, SidecarStartupError
from model_sidecar.mock_backends import EMBED_MODEL_ID


def test_health_schema(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert set(body) == {"mode", "backends", "model_ids"}
    assert body["mode"] == "mock"
    assert body["backends"] == {"tts": "mock-square-wave", "embed": "mock-hash"}
    assert body["model_ids"] == [EMBED_MODEL_ID]


def test_config_rejects_unknown_mode():
    with pytest.raises(SidecarStartupError, match="unknown mode"):
        SidecarConfig(mode="dry-run")


def test_config_rejects_unknown_backend():
    with pytest.raises(SidecarStartupError, match="unknown tts backend"):
        SidecarConfig(tts_backend="espeak")


def test_config_rejects_bad_port():
    with pytest.raises(SidecarStartupError, match="port"):
        SidecarConfig(port=0)


def test_real_mode_refuses_without_credentials(monkeypatch):
    from model_sidecar.app import create_app

    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    with pytest.raises(SidecarStartupError, match="OPENAI_API_KEY"):
        create_app(SidecarConfig(mode="real", tts_backend="openai_api"))

    monkeypatch.delenv("SPEECHT5_DIR", raising=False)
    with pytest.raises(SidecarStartupError, match="SPEECHT5_DIR"):
        create_app(SidecarConfig(mode="real", tts_backend="speecht5_vectors"))


def test_cli_real_mode_exits_nonzero(monkeypatch):
    from model_sidecar.__main__ import main

    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    code = main(["--mode", "real", "--tts-backend", "openai_api", "--port", "1"])
    assert code == 1
