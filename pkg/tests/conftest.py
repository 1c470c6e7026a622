import io
import json
import sys
import threading
import wave
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from disfluency_kit.chat_corpus import (
    Corpus,
    Setting,
    SourceMeta,
    merge_corpora,
    parse_chat,
)

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture_corpus() -> Corpus:
    """The six committed transcripts: 23 utterances, 12 speakers."""
    parts = []
    for p in sorted(FIXTURES.glob("*.cha")):
        setting = Setting.READING if "reading" in p.stem else Setting.INTERVIEW
        c, _ = parse_chat(p.read_text(encoding="utf-8"), SourceMeta(video_id=p.stem, setting=setting))
        parts.append(c)
    return merge_corpora(parts)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def fixture_corpus() -> Corpus:
    return load_fixture_corpus()


def wav_bytes(rate=16000, channels=1, width=2, frames=1600) -> bytes:
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(b"\x00" * (frames * channels * width))
    return buf.getvalue()


class TtsDouble(BaseHTTPRequestHandler):
    """In-process TTS service double; behavior is keyed on the voice id."""

    counts: dict = {}
    lock = threading.Lock()

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        voice = body.get("voice", "")
        with self.lock:
            self.counts[voice] = self.counts.get(voice, 0) + 1
            n = self.counts[voice]
        if self.path != "/tts":
            return self._error(404, "not_found", "unknown path")
        if body.get("format") != "wav16k_mono_pcm16":
            return self._error(400, "bad_format", "unsupported format")
        if voice == "bad-voice":
            return self._error(422, "unknown_voice", f"no such voice {voice!r}")
        if voice == "flaky" and n < 3:
            return self._error(503, "busy", "try again")
        if voice == "broken-audio":
            return self._ok(b"this is not audio")
        if voice == "wrong-rate":
            return self._ok(wav_bytes(rate=8000))
        return self._ok(wav_bytes())

    def _ok(self, payload: bytes):
        self.send_response(200)
        self.send_header("Content-Type", "audio/wav")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _error(self, status: int, code: str, message: str):
        payload = json.dumps({"code": code, "message": message}).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def tts_double():
    TtsDouble.counts = {}
    server = ThreadingHTTPServer(("127.0.0.1", 0), TtsDouble)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    thread.join(timeout=5)


def pytest_runtest_logreport(report):
    # one visible PASS/FAIL line per acceptance criterion
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        outcome = "PASS" if report.passed else "FAIL"
    elif report.failed:  # setup or teardown error
        outcome = "FAIL"
    else:
        return
    sys.stdout.write(f"\nACCEPTANCE {name}: {outcome}\n")
    sys.stdout.flush()
