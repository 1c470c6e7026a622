"""Run configuration: one nested YAML file, strict about unknown keys.

Command-line flags override config values, which override the defaults here.
"""

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .augmentor import (
    AugmentationProfile,
    IntRange,
    InterjectionRanges,
    PROFILES,
    PhraseRepetitionRanges,
    WordRepetitionRanges,
)
from .errors import ConfigError


@dataclass
class PathsConfig:
    corpus: str | None = None
    out_dir: str = "out"


@dataclass
class AugmentConfig:
    profile: object = "standard"  # profile name or a nested custom profile
    n: int = 0
    type_weights: dict | None = None


@dataclass
class FoldsConfig:
    k: int = 6
    speakers_per_fold: int = 2


@dataclass
class TtsConfig:
    endpoint: str | None = None
    concurrency: int = 4
    retry_attempts: int = 3
    retry_backoff_s: float = 1.0
    voices: list | None = None  # [{provider, voice_id}, ...]


@dataclass
class EmbeddingsConfig:
    source: str | None = None  # file path or http(s) endpoint
    model: str = "mock-hash-v1"
    cache_dir: str | None = None


@dataclass
class ScoringConfig:
    baseline_b: float = 0.0


@dataclass
class ReportConfig:
    formats: list[str] = field(default_factory=lambda: ["md", "csv", "json"])


@dataclass
class RunConfig:
    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    folds: FoldsConfig = field(default_factory=FoldsConfig)
    tts: TtsConfig = field(default_factory=TtsConfig)
    embeddings: EmbeddingsConfig = field(default_factory=EmbeddingsConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    report: ReportConfig = field(default_factory=ReportConfig)


_SECTIONS = {
    "paths": PathsConfig,
    "augment": AugmentConfig,
    "folds": FoldsConfig,
    "tts": TtsConfig,
    "embeddings": EmbeddingsConfig,
    "scoring": ScoringConfig,
    "report": ReportConfig,
}


def load_config(path: str | Path) -> RunConfig:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if raw is None:
        return RunConfig()
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    top_known = {"seed"} | set(_SECTIONS)
    unknown = sorted(set(raw) - top_known)
    if unknown:
        raise ConfigError(f"{path}: unknown config key(s): {unknown}")
    cfg = RunConfig()
    if "seed" in raw:
        if not isinstance(raw["seed"], int):
            raise ConfigError(f"{path}: seed must be an integer")
        cfg.seed = raw["seed"]
    for section, cls in _SECTIONS.items():
        if section not in raw:
            continue
        data = raw[section]
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: section {section!r} must be a mapping")
        known = {f.name for f in fields(cls)}
        bad = sorted(set(data) - known)
        if bad:
            raise ConfigError(f"{path}: unknown key(s) in section {section!r}: {bad}")
        setattr(cfg, section, cls(**data))
    return cfg


def _int_range(value, path: str) -> IntRange:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) for v in value)
    ):
        raise ConfigError(f"{path} must be a [lo, hi] integer pair")
    try:
        return IntRange(value[0], value[1])
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def resolve_profile(spec) -> AugmentationProfile:
    """A profile name ("standard", "extended") or a nested custom definition."""
    if isinstance(spec, AugmentationProfile):
        return spec
    if isinstance(spec, str):
        if spec not in PROFILES:
            raise ConfigError(f"unknown profile {spec!r} (have: {sorted(PROFILES)})")
        return PROFILES[spec]
    if not isinstance(spec, dict):
        raise ConfigError("profile must be a name or a mapping")
    required = {"word_rep", "phrase_rep", "interjection"}
    unknown = sorted(set(spec) - required - {"name"})
    if unknown:
        raise ConfigError(f"unknown profile key(s): {unknown}")
    missing = sorted(required - set(spec))
    if missing:
        raise ConfigError(f"profile missing section(s): {missing}")
    wr, pr, ij = spec["word_rep"], spec["phrase_rep"], spec["interjection"]
    for section, d, keys in (
        ("word_rep", wr, {"n_words", "n_repeats"}),
        ("phrase_rep", pr, {"phrase_len", "n_repeats"}),
        ("interjection", ij, {"n_sites", "n_repeats", "lexicon"}),
    ):
        if not isinstance(d, dict):
            raise ConfigError(f"profile.{section} must be a mapping")
        bad = sorted(set(d) - keys)
        if bad:
            raise ConfigError(f"unknown key(s) in profile.{section}: {bad}")
    lexicon = ij.get("lexicon", ["uh", "um"])
    if not isinstance(lexicon, (list, tuple)) or not all(isinstance(x, str) for x in lexicon):
        raise ConfigError("profile.interjection.lexicon must be a list of strings")
    return AugmentationProfile(
        name=str(spec.get("name", "custom")),
        word_rep=WordRepetitionRanges(
            n_words=_int_range(wr.get("n_words"), "profile.word_rep.n_words"),
            n_repeats=_int_range(wr.get("n_repeats"), "profile.word_rep.n_repeats"),
        ),
        phrase_rep=PhraseRepetitionRanges(
            phrase_len=_int_range(pr.get("phrase_len"), "profile.phrase_rep.phrase_len"),
            n_repeats=_int_range(pr.get("n_repeats"), "profile.phrase_rep.n_repeats"),
        ),
        interjection=InterjectionRanges(
            n_sites=_int_range(ij.get("n_sites"), "profile.interjection.n_sites"),
            n_repeats=_int_range(ij.get("n_repeats"), "profile.interjection.n_repeats"),
            lexicon=tuple(lexicon),
        ),
    )
