"""HTTP sidecar serving text-to-speech and token embeddings.

The service runs in one of two modes. Mock mode needs no credentials or
model weights and answers every request as a pure function of the request
body, which makes it suitable for offline pipelines and CI. Real mode
wraps actual synthesis and embedding backends and refuses to start when
the things it needs (API keys, local weights) are missing.
"""

from model_sidecar.config import SidecarConfig, SidecarStartupError

__version__ = "0.1.0"

__all__ = ["SidecarConfig", "SidecarStartupError", "__version__"]
