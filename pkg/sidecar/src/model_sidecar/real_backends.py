"""Real synthesis and embedding backends.

Loading is strict: if the configured backend cannot possibly serve requests
(no API key, no weights, missing optional deps) the constructor raises
SidecarStartupError and the process exits instead of limping along and
returning 5xx forever. Imports of torch / transformers are deferred to
load time so that mock mode never pays for them.
"""

from __future__ import annotations

import io
import os
import wave

import numpy as np

from model_sidecar.config import SidecarConfig, SidecarStartupError

TARGET_RATE_HZ = 16000


class BackendFailure(Exception):
    """A loaded backend failed on one request (mapped to 502 upstream)."""


def _require_env(name: str, hint: str) -> str:
    value = os.environ.get(name, "").strip()
    if not value:
        raise SidecarStartupError(f"real mode needs {name} set ({hint})")
    return value


def _pcm16_wav(samples: np.ndarray, rate: int) -> bytes:
    clipped = np.clip(samples, -1.0, 1.0)
    ints = (clipped * 32767.0).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(ints.tobytes())
    return buf.getvalue()


def _resample_linear(samples: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    if src_rate == dst_rate:
        return samples
    n_out = int(round(len(samples) * dst_rate / src_rate))
    x_out = np.linspace(0.0, len(samples) - 1, num=n_out)
    return np.interp(x_out, np.arange(len(samples)), samples)


class _OpenAiTts:
    """Thin proxy over the hosted speech endpoint; emits 16 kHz mono PCM16."""

    def __init__(self) -> None:
        self._key = _require_env("OPENAI_API_KEY", "openai_api tts backend")
        try:
            import requests  # noqa: F401
        except ImportError as e:
            raise SidecarStartupError(f"openai_api backend needs requests: {e}")

    def synth(self, text: str, voice: str) -> bytes:
        import requests

        try:
            resp = requests.post(
                "https://api.openai.com/v1/audio/speech",
                headers={"Authorization": f"Bearer {self._key}"},
                json={
                    "model": "tts-1",
                    "input": text,
                    "voice": voice,
                    "response_format": "wav",
                },
                timeout=60,
            )
        except requests.RequestException as e:
            raise BackendFailure(f"speech request failed: {e}")
        if resp.status_code != 200:
            raise BackendFailure(f"speech request returned HTTP {resp.status_code}")
        with wave.open(io.BytesIO(resp.content), "rb") as w:
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
            if w.getsampwidth() != 2 or w.getnchannels() != 1:
                raise BackendFailure("unexpected upstream audio layout")
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
        return _pcm16_wav(_resample_linear(samples, rate, TARGET_RATE_HZ), TARGET_RATE_HZ)


class _SpeechT5Tts:
    """Local SpeechT5 synthesis; speaker identity comes from an x-vector file.

    The weights directory must hold the model, vocoder and a `speakers.npz`
    mapping voice ids to 512-dim x-vectors.
    """

    def __init__(self) -> None:
        weights_dir = _require_env("SPEECHT5_DIR", "speecht5_vectors tts backend")
        if not os.path.isdir(weights_dir):
            raise SidecarStartupError(f"SPEECHT5_DIR does not exist: {weights_dir}")
        try:
            import torch  # noqa: F401
            from transformers import (  # noqa: F401
                SpeechT5ForTextToSpeech,
                SpeechT5HifiGan,
                SpeechT5Processor,
            )
        except ImportError as e:
            raise SidecarStartupError(f"speecht5_vectors backend needs torch+transformers: {e}")
        from transformers import SpeechT5ForTextToSpeech, SpeechT5HifiGan, SpeechT5Processor

        self._processor = SpeechT5Processor.from_pretrained(weights_dir)
        self._model = SpeechT5ForTextToSpeech.from_pretrained(weights_dir)
        vocoder_dir = os.path.join(weights_dir, "vocoder")
        self._vocoder = SpeechT5HifiGan.from_pretrained(
            vocoder_dir if os.path.isdir(vocoder_dir) else weights_dir
        )
        speakers_path = os.path.join(weights_dir, "speakers.npz")
        if not os.path.isfile(speakers_path):
            raise SidecarStartupError(f"missing speaker x-vectors: {speakers_path}")
        self._speakers = dict(np.load(speakers_path))

    def knows_voice(self, voice: str) -> bool:
        return voice in self._speakers

    def synth(self, text: str, voice: str) -> bytes:
        import torch

        inputs = self._processor(text=text, return_tensors="pt")
        xvec = torch.tensor(self._speakers[voice], dtype=torch.float32).unsqueeze(0)
        try:
            with torch.no_grad():
                speech = self._model.generate_speech(
                    inputs["input_ids"], xvec, vocoder=self._vocoder
                )
        except Exception as e:
            raise BackendFailure(f"synthesis failed: {e}")
        # SpeechT5 vocoder output is already 16 kHz
        return _pcm16_wav(speech.numpy().astype(np.float64), TARGET_RATE_HZ)


class _HfEmbedder:
    """Word vectors from a transformer encoder.

    Sub-word pieces are pooled to whitespace words by averaging the chosen
    hidden layer and re-normalizing (mean then normalize, in that order).
    """

    def __init__(self, model_id: str, layer: int) -> None:
        try:
            import torch  # noqa: F401
            from transformers import AutoModel, AutoTokenizer  # noqa: F401
        except ImportError as e:
            raise SidecarStartupError(f"embedding backend needs torch+transformers: {e}")
        from transformers import AutoModel, AutoTokenizer

        self.model_id = model_id
        self._layer = layer
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(model_id)
            self._model = AutoModel.from_pretrained(model_id, output_hidden_states=True)
        except Exception as e:
            raise SidecarStartupError(f"cannot load embedding model {model_id!r}: {e}")
        self._model.eval()

    def embed(self, text: str) -> dict:
        import torch

        tokens = text.split()
        enc = self._tokenizer(
            tokens,
            is_split_into_words=True,
            return_tensors="pt",
            truncation=True,
        )
        try:
            with torch.no_grad():
                out = self._model(**enc)
        except Exception as e:
            raise BackendFailure(f"embedding forward pass failed: {e}")
        hidden = out.hidden_states[self._layer][0].numpy().astype(np.float64)
        word_ids = enc.word_ids(0)

        pieces: dict[int, list[np.ndarray]] = {}
        for row, wid in zip(hidden, word_ids):
            if wid is not None:
                pieces.setdefault(wid, []).append(row)
        vectors = []
        for i in range(len(tokens)):
            mean = np.mean(pieces[i], axis=0)
            norm = float(np.linalg.norm(mean))
            if norm == 0.0:
                raise BackendFailure(f"zero embedding for word {tokens[i]!r}")
            vectors.append((mean / norm).tolist())
        dim = len(vectors[0]) if vectors else int(hidden.shape[1])
        return {"dim": dim, "tokens": tokens, "vectors": vectors}


class RealBackends:
    """Bundle of loaded real backends behind the same surface as the mock."""

    mode = "real"

    def __init__(self, config: SidecarConfig) -> None:
        if config.tts_backend == "openai_api":
            self._tts = _OpenAiTts()
        else:
            self._tts = _SpeechT5Tts()
        self._embedder = _HfEmbedder(config.embed_model_id, config.embed_layer)
        self.embed_model_id = self._embedder.model_id
        self._tts_name = config.tts_backend

    def describe(self) -> dict:
        return {"tts": self._tts_name, "embed": "transformer-encoder"}

    def model_ids(self) -> list[str]:
        return [self.embed_model_id]

    def knows_voice(self, voice: str) -> bool:
        know = getattr(self._tts, "knows_voice", None)
        # the hosted API validates voices itself; accept and let it answer
        return True if know is None else know(voice)

    def tts(self, text: str, voice: str) -> bytes:
        return self._tts.synth(text, voice)

    def embed(self, text: str) -> dict:
        return self._embedder.embed(text)
