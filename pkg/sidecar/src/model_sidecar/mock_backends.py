"""Deterministic stand-ins for the synthesis and embedding backends.

Both mock endpoints are pure functions of the request body: the same
request yields the same bytes on every platform. Audio is a fixed-amplitude
square wave whose pitch is derived from a hash of (text, voice); embeddings
are unit vectors drawn from a counter-based generator seeded by a hash of
(token, position). Clients that consume these vectors elsewhere reproduce
the same scheme independently, so the hashing below is a wire contract:
do not change the seed derivation or the generator.
"""

from __future__ import annotations

import hashlib
import io
import wave

import numpy as np

SAMPLE_RATE_HZ = 16000
# 0.08 s of audio per whitespace token
SAMPLES_PER_TOKEN = 1280
AMPLITUDE = 8000

EMBED_DIM = 16
EMBED_MODEL_ID = "mock-hash-v1"

MOCK_VOICES = frozenset(
    [f"voice-{i}" for i in range(10)] + [f"speaker-{i}" for i in range(10)]
)

_MASK64 = (1 << 64) - 1


class _SplitMix64:
    """64-bit mixing generator, kept bit-identical to the consumer side."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def random(self) -> float:
        # 53-bit mantissa, uniform in [0, 1)
        return (self.next_u64() >> 11) * 2.0**-53


def _hash64(*parts: str) -> int:
    """Big-endian integer of an 8-byte blake2b over NUL-joined parts."""
    h = hashlib.blake2b("\x00".join(parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "big")


def tone_frequency_hz(text: str, voice: str) -> int:
    """Pitch for a mock utterance, 120..999 Hz, stable across platforms."""
    return 120 + _hash64(text, voice) % 880


def synth_wav(text: str, voice: str) -> bytes:
    """Render mock speech for `text` as a 16 kHz mono PCM16 WAV.

    Duration is 0.08 s per whitespace token. The waveform is a square wave
    built with integer arithmetic only, so the bytes carry no float noise.
    """
    tokens = text.split()
    frames = SAMPLES_PER_TOKEN * len(tokens)
    freq = tone_frequency_hz(text, voice)
    half = max(1, SAMPLE_RATE_HZ // freq // 2)

    high = AMPLITUDE.to_bytes(2, "little", signed=True) * half
    low = (-AMPLITUDE).to_bytes(2, "little", signed=True) * half
    period = high + low
    reps = frames // (2 * half) + 1
    pcm = (period * reps)[: frames * 2]

    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(SAMPLE_RATE_HZ)
        w.writeframes(pcm)
    return buf.getvalue()


def token_vector(token: str, position: int) -> np.ndarray:
    """Unit vector for one (token, position) pair."""
    rng = _SplitMix64(_hash64(token, str(position)))
    vec = np.array(
        [2.0 * rng.random() - 1.0 for _ in range(EMBED_DIM)], dtype=np.float64
    )
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # unreachable in practice; keeps the contract total
        vec[0] = 1.0
        return vec
    return vec / norm


def embed_text(text: str) -> dict:
    """Embed whitespace tokens of `text`; response body for the embed route."""
    tokens = text.split()
    vectors = [token_vector(tok, i).tolist() for i, tok in enumerate(tokens)]
    return {"dim": EMBED_DIM, "tokens": tokens, "vectors": vectors}


class MockBackends:
    """In-process backends; nothing to load, nothing to fail."""

    mode = "mock"

    def __init__(self, embed_model_id: str = EMBED_MODEL_ID) -> None:
        # the mock only knows its own hash scheme; advertise that id
        # regardless of what a real deployment would have loaded
        self.embed_model_id = EMBED_MODEL_ID

    def describe(self) -> dict:
        return {"tts": "mock-square-wave", "embed": "mock-hash"}

    def model_ids(self) -> list[str]:
        return [self.embed_model_id]

    def knows_voice(self, voice: str) -> bool:
        return voice in MOCK_VOICES

    def tts(self, text: str, voice: str) -> bytes:
        return synth_wav(text, voice)

    def embed(self, text: str) -> dict:
        return embed_text(text)
