"""Mock /tts behavior: determinism, the duration rule, audio layout, errors."""

import io
import wave

from model_sidecar.mock_backends import SAMPLE_RATE_HZ, SAMPLES_PER_TOKEN

WIRE_FORMAT = "wav16k_mono_pcm16"


def tts(client, text, voice="voice-0", fmt=WIRE_FORMAT):
    return client.post("/tts", json={"text": text, "voice": voice, "format": fmt})


def wav_props(data: bytes):
    with wave.open(io.BytesIO(data), "rb") as w:
        return w.getframerate(), w.getnchannels(), w.getsampwidth(), w.getnframes()


def test_identical_requests_identical_bytes(client):
    a = tts(client, "the cat sat")
    b = tts(client, "the cat sat")
    assert a.status_code == 200 and b.status_code == 200
    assert a.content == b.content


def test_duration_is_008s_per_token(client):
    resp = tts(client, "my my name is")
    assert resp.status_code == 200
    rate, channels, width, frames = wav_props(resp.content)
    assert frames == 4 * SAMPLES_PER_TOKEN
    assert frames / rate == 0.32


def test_audio_layout_is_16k_mono_pcm16(client):
    resp = tts(client, "hello")
    rate, channels, width, frames = wav_props(resp.content)
    assert rate == SAMPLE_RATE_HZ == 16000
    assert channels == 1
    assert width == 2
    assert frames == SAMPLES_PER_TOKEN
    assert resp.headers["content-type"] == "audio/wav"


def test_text_changes_audio(client):
    a = tts(client, "one two")
    b = tts(client, "one three")
    assert a.content != b.content


def test_voice_changes_audio(client):
    a = tts(client, "one two", voice="voice-1")
    b = tts(client, "one two", voice="voice-2")
    assert a.content != b.content
    # same length either way; only the waveform differs
    assert wav_props(a.content)[3] == wav_props(b.content)[3]


def test_whitespace_runs_count_once(client):
    a = tts(client, "a  b\tc")
    assert wav_props(a.content)[3] == 3 * SAMPLES_PER_TOKEN


def test_empty_text_rejected(client):
    for text in ("", "   "):
        resp = tts(client, text)
        assert resp.status_code == 400
        body = resp.json()
        assert body["code"] == "empty_text"
        assert "message" in body


def test_bad_format_rejected(client):
    resp = tts(client, "hello", fmt="mp3")
    assert resp.status_code == 400
    assert resp.json()["code"] == "bad_format"

    resp = client.post("/tts", json={"text": "hello", "voice": "voice-0"})
    assert resp.status_code == 400
    assert resp.json()["code"] == "bad_format"


def test_unknown_voice_rejected(client):
    resp = tts(client, "hello", voice="narrator")
    assert resp.status_code == 422
    body = resp.json()
    assert body["code"] == "unknown_voice"
    assert "narrator" in body["message"]


def test_known_voice_families(client):
    assert tts(client, "hi", voice="voice-9").status_code == 200
    assert tts(client, "hi", voice="speaker-0").status_code == 200
    assert tts(client, "hi", voice="speaker-10").status_code == 422


def test_malformed_body_rejected(client):
    resp = client.post("/tts", content=b"not json", headers={"content-type": "application/json"})
    assert resp.status_code == 400
    assert resp.json()["code"] == "bad_request"

    resp = client.post("/tts", json=["text"])
    assert resp.status_code == 400
    assert resp.json()["code"] == "bad_request"
