"""Text-to-speech manifests and their execution against an HTTP service.

A manifest holds one job per utterance: the text to speak, the voice (drawn
from a pool by a substream keyed on the utterance id, so assignment survives
reordering), the output path, and the fixed audio target (16 kHz mono PCM16
WAV). Execution is idempotent: outputs that already exist and validate are
skipped, files are written to a temp path and renamed only after validation,
and failures are retried with exponential backoff. The execution report keeps
status per job; timestamps go to the log stream, never into the report, so
reports stay byte-comparable.
"""

import json
import logging
import time
import wave
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import requests

from .chat_corpus import Corpus, derive_fluent_text
from .errors import AudioReadError, FluentEmptyError, ToolkitError
from .rng import substream

log = logging.getLogger(__name__)

WIRE_FORMAT = "wav16k_mono_pcm16"


class VoiceProvider(str, Enum):
    OPENAI_STYLE = "openai_style"
    SPEAKER_VECTOR_STYLE = "speaker_vector_style"
    MOCK = "mock"


@dataclass(frozen=True)
class VoiceSpec:
    provider: VoiceProvider
    voice_id: str
    notes: str = ""

    def to_dict(self) -> dict:
        return {"provider": self.provider.value, "voice_id": self.voice_id, "notes": self.notes}

    @classmethod
    def from_dict(cls, d: dict) -> "VoiceSpec":
        return cls(
            provider=VoiceProvider(d["provider"]),
            voice_id=d["voice_id"],
            notes=d.get("notes", ""),
        )


@dataclass(frozen=True)
class AudioSpec:
    sample_rate_hz: int = 16000
    channels: int = 1
    encoding: str = "PCM16"

    def to_dict(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "channels": self.channels,
            "encoding": self.encoding,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AudioSpec":
        return cls(
            sample_rate_hz=int(d["sample_rate_hz"]),
            channels=int(d["channels"]),
            encoding=d["encoding"],
        )


@dataclass(frozen=True)
class TtsJob:
    job_id: str
    text: str
    voice: VoiceSpec
    output_path: str  # relative to the execution output directory
    expected_audio: AudioSpec = AudioSpec()

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "text": self.text,
            "voice": self.voice.to_dict(),
            "output_path": self.output_path,
            "expected_audio": self.expected_audio.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TtsJob":
        return cls(
            job_id=d["job_id"],
            text=d["text"],
            voice=VoiceSpec.from_dict(d["voice"]),
            output_path=d["output_path"],
            expected_audio=AudioSpec.from_dict(d["expected_audio"]),
        )


@dataclass
class TtsManifest:
    jobs: list[TtsJob]
    created_from: str  # corpus or augmentation file the jobs came from
    seed: int

    def __post_init__(self):
        ids = [j.job_id for j in self.jobs]
        if len(ids) != len(set(ids)):
            raise ToolkitError("manifest job ids must be unique")
        paths = [j.output_path for j in self.jobs]
        if len(paths) != len(set(paths)):
            raise ToolkitError("manifest output paths must be unique")


DEFAULT_FLUENT_VOICES = tuple(
    VoiceSpec(VoiceProvider.SPEAKER_VECTOR_STYLE, f"speaker-{i}") for i in range(10)
)
DEFAULT_MOCK_VOICES = tuple(VoiceSpec(VoiceProvider.MOCK, f"voice-{i}") for i in range(10))


def _assign_voice(voice_pool: tuple[VoiceSpec, ...] | list[VoiceSpec], seed: int, uid: str) -> VoiceSpec:
    rng = substream(seed, "voice", uid)
    return voice_pool[rng.randint(0, len(voice_pool) - 1)]


def build_manifest(
    items: list[dict] | list,
    voice_pool: list[VoiceSpec] | tuple[VoiceSpec, ...],
    seed: int,
    created_from: str = "",
) -> TtsManifest:
    """One job per augmented utterance (rows from save_augmented or
    AugmentedUtterance objects); voices drawn uniformly with replacement."""
    if not voice_pool:
        raise ToolkitError("voice pool must be non-empty")
    jobs = []
    for item in items:
        if isinstance(item, dict):
            uid, text = item["id"], item["verbatim_text"]
        else:
            uid, text = item.id, " ".join(item.verbatim_tokens)
        jobs.append(
            TtsJob(
                job_id=uid,
                text=text,
                voice=_assign_voice(tuple(voice_pool), seed, uid),
                output_path=f"audio/{uid}.wav",
            )
        )
    return TtsManifest(jobs=jobs, created_from=created_from, seed=seed)


def build_fluent_manifest(
    corpus: Corpus,
    voice_pool: list[VoiceSpec] | tuple[VoiceSpec, ...] = DEFAULT_FLUENT_VOICES,
    seed: int = 0,
    created_from: str = "",
) -> TtsManifest:
    """One job per corpus utterance, speaking the fluent rendition. Utterances
    with no fluent material are skipped; the skip count is logged."""
    if not corpus.utterances:
        raise ToolkitError("cannot build a manifest from an empty corpus")
    if not voice_pool:
        raise ToolkitError("voice pool must be non-empty")
    jobs = []
    skipped = 0
    for u in corpus.utterances:
        try:
            fluent = derive_fluent_text(u)
        except FluentEmptyError:
            skipped += 1
            continue
        jobs.append(
            TtsJob(
                job_id=u.id,
                text=" ".join(fluent),
                voice=_assign_voice(tuple(voice_pool), seed, u.id),
                output_path=f"audio/{u.id}.wav",
            )
        )
    if skipped:
        log.info("skipped %d utterance(s) with no fluent material", skipped)
    return TtsManifest(jobs=jobs, created_from=created_from, seed=seed)


def _manifest_meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def save_manifest(manifest: TtsManifest, path: str | Path) -> None:
    """Jobs as JSONL; created_from and seed in a sibling .meta.json."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for job in manifest.jobs:
            f.write(json.dumps(job.to_dict(), ensure_ascii=False) + "\n")
    _manifest_meta_path(path).write_text(
        json.dumps({"created_from": manifest.created_from, "seed": manifest.seed}) + "\n",
        encoding="utf-8",
    )


def load_manifest(path: str | Path) -> TtsManifest:
    path = Path(path)
    jobs = []
    with path.open("r", encoding="utf-8") as f:
        for i, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                jobs.append(TtsJob.from_dict(json.loads(line)))
            except (KeyError, ValueError, TypeError) as e:
                raise ToolkitError(f"{path}:{i}: bad manifest row: {e}") from e
    created_from, seed = "", 0
    meta_path = _manifest_meta_path(path)
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        created_from, seed = meta.get("created_from", ""), meta.get("seed", 0)
    return TtsManifest(jobs=jobs, created_from=created_from, seed=seed)


def validate_audio(path: str | Path, spec: AudioSpec = AudioSpec()) -> list[str]:
    """Empty list when the file meets the spec; otherwise named violations.
    A missing or unreadable file raises AudioReadError instead."""
    path = Path(path)
    if not path.exists():
        raise AudioReadError(f"{path} does not exist")
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise AudioReadError(f"{path}: {e}") from e
    violations = []
    try:
        with wave.open(str(path), "rb") as w:
            if w.getframerate() != spec.sample_rate_hz:
                violations.append(
                    f"sample_rate: got {w.getframerate()}, want {spec.sample_rate_hz}"
                )
            if w.getnchannels() != spec.channels:
                violations.append(f"channels: got {w.getnchannels()}, want {spec.channels}")
            if spec.encoding == "PCM16" and (w.getsampwidth() != 2 or w.getcomptype() != "NONE"):
                violations.append("encoding: not 16-bit linear PCM")
            if w.getnframes() == 0:
                violations.append("empty audio: zero frames")
    except (wave.Error, EOFError):
        violations.append(f"container: not a WAV file ({len(raw)} bytes)")
    return violations


class JobStatus(str, Enum):
    OK = "ok"
    SKIPPED = "skipped"
    FAILED = "failed"


@dataclass(frozen=True)
class JobResult:
    job_id: str
    status: JobStatus
    detail: str = ""

    def to_dict(self) -> dict:
        return {"job_id": self.job_id, "status": self.status.value, "detail": self.detail}


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff_s: float = 1.0
    factor: float = 2.0

    def delays(self):
        d = self.backoff_s
        for _ in range(self.attempts - 1):
            yield d
            d *= self.factor


def _fetch_tts(job: TtsJob, endpoint: str, retry: RetryPolicy, timeout_s: float) -> bytes:
    url = endpoint.rstrip("/") + "/tts"
    payload = {"text": job.text, "voice": job.voice.voice_id, "format": WIRE_FORMAT}
    delays = list(retry.delays()) + [None]
    last_error = "no attempts made"
    for delay in delays:
        try:
            resp = requests.post(url, json=payload, timeout=timeout_s)
            if resp.status_code == 200:
                return resp.content
            try:
                err = resp.json()
                last_error = f"HTTP {resp.status_code}: {err.get('code')}: {err.get('message')}"
            except ValueError:
                last_error = f"HTTP {resp.status_code}"
        except requests.RequestException as e:
            last_error = f"request failed: {e}"
        if delay is not None:
            time.sleep(delay)
    raise ToolkitError(last_error)


def _run_job(job: TtsJob, endpoint: str, out_dir: Path, retry: RetryPolicy, timeout_s: float) -> JobResult:
    target = out_dir / job.output_path
    if target.exists():
        try:
            if not validate_audio(target, job.expected_audio):
                return JobResult(job.job_id, JobStatus.SKIPPED, "existing output is valid")
        except AudioReadError:
            pass  # unreadable leftover, regenerate it
    try:
        audio = _fetch_tts(job, endpoint, retry, timeout_s)
    except ToolkitError as e:
        return JobResult(job.job_id, JobStatus.FAILED, str(e))
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(audio)
    try:
        violations = validate_audio(tmp, job.expected_audio)
    except AudioReadError as e:
        tmp.unlink(missing_ok=True)
        return JobResult(job.job_id, JobStatus.FAILED, str(e))
    if violations:
        tmp.unlink(missing_ok=True)
        return JobResult(job.job_id, JobStatus.FAILED, "; ".join(violations))
    tmp.replace(target)
    return JobResult(job.job_id, JobStatus.OK, "")


def execute_manifest(
    manifest: TtsManifest,
    endpoint: str,
    out_dir: str | Path,
    concurrency: int = 4,
    retry: RetryPolicy = RetryPolicy(),
    timeout_s: float = 30.0,
) -> list[JobResult]:
    """Run every job; results come back in manifest order regardless of the
    completion order, so reports are stable under any concurrency level."""
    if concurrency < 1:
        raise ToolkitError("concurrency must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        results = list(
            pool.map(lambda j: _run_job(j, endpoint, out_dir, retry, timeout_s), manifest.jobs)
        )
    counts = {s: sum(1 for r in results if r.status == s) for s in JobStatus}
    log.info(
        "tts execution: %d ok, %d skipped, %d failed",
        counts[JobStatus.OK],
        counts[JobStatus.SKIPPED],
        counts[JobStatus.FAILED],
    )
    return results


def save_execution_report(results: list[JobResult], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        for r in results:
            f.write(json.dumps(r.to_dict()) + "\n")
