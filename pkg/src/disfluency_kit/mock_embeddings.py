"""Deterministic stand-in embeddings for offline runs and tests.

Each (token, position) pair hashes to a seed, the seed drives a SplitMix64
draw of `dim` uniform components in [-1, 1), and the vector is L2-normalized.
Pure integer and IEEE float arithmetic, so the same text yields byte-identical
vectors on every platform. The embedding service's mock mode implements this
same scheme at d=16.
"""

import hashlib
from pathlib import Path

import numpy as np

from .metrics import EmbeddingTable, normalize, save_embeddings

MOCK_DIM = 16
MOCK_MODEL_ID = "mock-hash-v1"


def mock_token_vector(token: str, position: int, dim: int = MOCK_DIM) -> np.ndarray:
    h = hashlib.blake2b(f"{token}\x00{position}".encode("utf-8"), digest_size=8)
    seed = int.from_bytes(h.digest(), "big")
    from .rng import SplitMix64

    rng = SplitMix64(seed)
    vec = np.array([2.0 * rng.random() - 1.0 for _ in range(dim)], dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:  # unreachable in practice, but never divide by zero
        vec[0] = 1.0
        return vec
    return vec / norm


def mock_embed_tokens(tokens: list[str], dim: int = MOCK_DIM) -> list[np.ndarray]:
    return [mock_token_vector(t, i, dim) for i, t in enumerate(tokens)]


def build_eval_embeddings(
    refs: dict[str, str],
    hyps: dict[str, str],
    dim: int = MOCK_DIM,
    model_id: str = MOCK_MODEL_ID,
) -> EmbeddingTable:
    """Embeddings for every normalized token of both text streams, keyed
    ``<utterance_id>::ref`` and ``<utterance_id>::hyp`` (the key convention
    the evaluator uses for file-based embedding lookup)."""
    table = EmbeddingTable(model_id=model_id, dim=dim)
    for role, texts in (("ref", refs), ("hyp", hyps)):
        for uid in sorted(texts):
            tokens = normalize(texts[uid]).tokens
            for i, vec in enumerate(mock_embed_tokens(list(tokens), dim)):
                table.vectors[(f"{uid}::{role}", i)] = vec
    return table


def write_mock_embedding_file(
    refs: dict[str, str],
    hyps: dict[str, str],
    path: str | Path,
    dim: int = MOCK_DIM,
    model_id: str = MOCK_MODEL_ID,
) -> int:
    table = build_eval_embeddings(refs, hyps, dim=dim, model_id=model_id)
    save_embeddings(table, path)
    return len(table.vectors)
