import pytest
from fastapi.testclient import TestClient

from model_sidecar.app import create_app
from model_sidecar.config import SidecarConfig


@pytest.fixture(scope="session")
def client():
    app = create_app(SidecarConfig(mode="mock"))
    with TestClient(app) as c:
        yield c
