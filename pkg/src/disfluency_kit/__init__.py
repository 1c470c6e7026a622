"""Toolkit for building, augmenting, synthesizing, and scoring disfluent-speech corpora."""

__version__ = "0.1.0"

from .errors import ToolkitError

__all__ = ["ToolkitError", "__version__"]
