"""Shared exception types. Every toolkit error derives from ToolkitError so the
CLI can map any domain failure to exit code 1 without enumerating modules."""


class ToolkitError(Exception):
    pass


class ChatParseError(ToolkitError):
    """Raised for malformed transcript input; message carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class FluentEmptyError(ToolkitError):
    """An utterance contains nothing but disfluent material."""


class EmptyReferenceError(ToolkitError):
    """A reference normalized to zero tokens; the evaluation set is defective."""


class DuplicateKeyError(ToolkitError):
    pass


class EmbeddingFormatError(ToolkitError):
    pass


class SidecarUnavailableError(ToolkitError):
    """The embedding/TTS service could not be reached (distinct from a cache miss)."""


class PlanMismatchError(ToolkitError):
    """An augmentation plan does not fit the token sequence it is applied to."""


class AudioReadError(ToolkitError):
    """Audio file missing or unreadable (distinct from a spec violation)."""


class ConfigError(ToolkitError):
    pass
