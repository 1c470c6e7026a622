"""Mock /embed behavior: shape, unit norms, determinism, position sensitivity."""

import math

from model_sidecar.mock_backends import EMBED_DIM, EMBED_MODEL_ID


def embed(client, text, model=EMBED_MODEL_ID):
    return client.post("/embed", json={"model": model, "text": text})


def test_response_shape(client):
    resp = embed(client, "my name is")
    assert resp.status_code == 200
    body = resp.json()
    assert set(body) == {"dim", "tokens", "vectors"}
    assert body["dim"] == EMBED_DIM == 16
    assert body["tokens"] == ["my", "name", "is"]
    assert len(body["vectors"]) == 3
    assert all(len(v) == 16 for v in body["vectors"])


def test_vectors_are_unit_norm(client):
    body = embed(client, "one two three four five").json()
    for vec in body["vectors"]:
        norm = math.sqrt(sum(x * x for x in vec))
        assert abs(norm - 1.0) <= 1e-9


def test_determinism(client):
    a = embed(client, "the same request").json()
    b = embed(client, "the same request").json()
    assert a == b


def test_same_token_different_position_differs(client):
    body = embed(client, "uh uh").json()
    assert body["tokens"] == ["uh", "uh"]
    v0, v1 = body["vectors"]
    assert v0 != v1


def test_same_token_same_position_matches_across_texts(client):
    a = embed(client, "uh one").json()
    b = embed(client, "uh two").json()
    assert a["vectors"][0] == b["vectors"][0]


def test_empty_text_rejected(client):
    for text in ("", "  \t "):
        resp = embed(client, text)
        assert resp.status_code == 400
        assert resp.json()["code"] == "empty_text"


def test_unknown_model_not_loaded(client):
    resp = embed(client, "hello", model="bert-base-uncased")
    assert resp.status_code == 503
    body = resp.json()
    assert body["code"] == "model_not_loaded"
    assert "bert-base-uncased" in body["message"]


def test_model_field_optional(client):
    resp = client.post("/embed", json={"text": "hello"})
    assert resp.status_code == 200
    assert resp.json()["dim"] == 16
