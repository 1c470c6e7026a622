"""Text normalization, alignment, word error rate, and embedding-based scoring.

Normalization is a fixed five-step pipeline: delete bracketed/parenthesized
substrings, lowercase, replace Unicode Mark/Symbol/Punctuation characters with
spaces, collapse whitespace, split. It is idempotent, and both sides of every
comparison pass through it, so WER and the embedding score share one token
stream.

Alignment is plain Levenshtein with unit costs. The backtrace breaks cost ties
in a fixed order (diagonal first, then deletion, then insertion) so the
operation list is deterministic; the counts satisfy S + D + C = len(ref) and
S + I + C = len(hyp), and S + D + I equals the minimal edit distance.

The embedding score is a bidirectional greedy-max token similarity: recall is
the mean over hypothesis tokens of the best cosine against reference tokens,
precision the same with the roles flipped, F1 their harmonic mean (0 when
P + R = 0), optionally rescaled by a baseline: (f1 - b) / (1 - b).
"""

import hashlib
import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import requests

from .errors import (
    DuplicateKeyError,
    EmbeddingFormatError,
    EmptyReferenceError,
    SidecarUnavailableError,
    ToolkitError,
)

log = logging.getLogger(__name__)

_BRACKETED_RX = re.compile(r"\[[^\]]*\]")
_PARENED_RX = re.compile(r"\([^)]*\)")
_WS_RX = re.compile(r"\s+")


@dataclass(frozen=True)
class NormalizedText:
    tokens: tuple[str, ...]
    original: str


def normalize(raw: str) -> NormalizedText:
    s = _BRACKETED_RX.sub("", raw)
    s = _PARENED_RX.sub("", s)
    s = s.lower()
    s = "".join(" " if unicodedata.category(ch)[0] in "MSP" else ch for ch in s)
    s = _WS_RX.sub(" ", s).strip()
    return NormalizedText(tokens=tuple(s.split(" ")) if s else (), original=raw)


class OpKind(str, Enum):
    MATCH = "match"
    SUBSTITUTE = "substitute"
    DELETE = "delete"  # reference token absent from the hypothesis
    INSERT = "insert"  # extra hypothesis token


@dataclass(frozen=True)
class AlignOp:
    kind: OpKind
    ref_index: int | None
    hyp_index: int | None


@dataclass(frozen=True)
class Alignment:
    ops: tuple[AlignOp, ...]
    S: int
    D: int
    I: int
    C: int


def align(ref: list[str], hyp: list[str]) -> Alignment:
    n, m = len(ref), len(hyp)
    # d[i][j]: edit distance between ref[:i] and hyp[:j]
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        row, prev = d[i], d[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            row[j] = min(sub, prev[j] + 1, row[j - 1] + 1)

    # backtrace; ties resolve diagonal > delete > insert
    ops: list[AlignOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            if d[i][j] == d[i - 1][j - 1] + cost:
                kind = OpKind.MATCH if cost == 0 else OpKind.SUBSTITUTE
                ops.append(AlignOp(kind, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and d[i][j] == d[i - 1][j] + 1:
            ops.append(AlignOp(OpKind.DELETE, i - 1, None))
            i -= 1
            continue
        ops.append(AlignOp(OpKind.INSERT, None, j - 1))
        j -= 1
    ops.reverse()

    counts = {k: 0 for k in OpKind}
    for op in ops:
        counts[op.kind] += 1
    return Alignment(
        ops=tuple(ops),
        S=counts[OpKind.SUBSTITUTE],
        D=counts[OpKind.DELETE],
        I=counts[OpKind.INSERT],
        C=counts[OpKind.MATCH],
    )


@dataclass(frozen=True)
class WerBreakdown:
    wer: float
    S: int
    D: int
    I: int
    C: int


def wer(a: Alignment) -> WerBreakdown:
    denom = a.S + a.D + a.C
    if denom == 0:
        raise EmptyReferenceError("word error rate is undefined for an empty reference")
    return WerBreakdown(wer=(a.S + a.D + a.I) / denom, S=a.S, D=a.D, I=a.I, C=a.C)


@dataclass(frozen=True)
class BertScoreResult:
    precision: float
    recall: float
    f1: float
    f1_rescaled: float


def bertscore(
    hyp_vectors: list[np.ndarray] | np.ndarray,
    ref_vectors: list[np.ndarray] | np.ndarray,
    baseline_b: float = 0.0,
) -> BertScoreResult:
    """Greedy-max similarity between two lists of unit-norm vectors of one
    dimension. baseline_b must be < 1; rescaled = (f1 - b) / (1 - b)."""
    if baseline_b >= 1.0:
        raise ToolkitError("baseline_b must be < 1")
    H = np.asarray(hyp_vectors, dtype=np.float64)
    R = np.asarray(ref_vectors, dtype=np.float64)
    if H.ndim != 2 or R.ndim != 2 or H.shape[0] == 0 or R.shape[0] == 0:
        raise ToolkitError("bertscore needs non-empty vector lists on both sides")
    if H.shape[1] != R.shape[1]:
        raise ToolkitError(f"dimension mismatch: hyp d={H.shape[1]}, ref d={R.shape[1]}")
    sim = H @ R.T
    recall = float(sim.max(axis=1).mean())  # over hypothesis tokens
    precision = float(sim.max(axis=0).mean())  # over reference tokens
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return BertScoreResult(
        precision=precision,
        recall=recall,
        f1=f1,
        f1_rescaled=(f1 - baseline_b) / (1.0 - baseline_b),
    )


@dataclass
class EmbeddingTable:
    """Vectors keyed by (utterance key, token index); unit norm enforced on load."""

    model_id: str
    dim: int
    vectors: dict[tuple[str, int], np.ndarray] = field(default_factory=dict)

    def tokens_for(self, key: str, n_tokens: int) -> list[np.ndarray]:
        out = []
        for i in range(n_tokens):
            v = self.vectors.get((key, i))
            if v is None:
                raise ToolkitError(f"embedding table has no vector for ({key!r}, {i})")
            out.append(v)
        return out


_HEADER_RX = re.compile(r"^d=(\d+) model=(.+)$")


def _unit(vec: np.ndarray, context: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise EmbeddingFormatError(f"{context}: zero vector cannot be normalized")
    # vectors written by this toolkit are unit norm already; rescaling them
    # by 1 +- 1ulp would break byte-exact save/load round trips
    if abs(norm - 1.0) <= 1e-12:
        return vec
    return vec / norm


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """File format: header ``d=<dim> model=<id>`` then tab-separated rows
    ``utterance_id<TAB>token_index<TAB>v1,v2,...,vd``."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        m = _HEADER_RX.match(header)
        if not m:
            raise EmbeddingFormatError(f"{path}: bad header {header!r}")
        dim, model_id = int(m.group(1)), m.group(2)
        table = EmbeddingTable(model_id=model_id, dim=dim)
        for lineno, line in enumerate(f, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise EmbeddingFormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
            key = (parts[0], int(parts[1]))
            if key in table.vectors:
                raise DuplicateKeyError(f"{path}:{lineno}: duplicate key {key}")
            vec = np.array([float(x) for x in parts[2].split(",")], dtype=np.float64)
            if vec.shape[0] != dim:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: vector has {vec.shape[0]} components, header says {dim}"
                )
            table.vectors[key] = _unit(vec, f"{path}:{lineno}")
    return table


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        f.write(f"d={table.dim} model={table.model_id}\n")
        for (key, idx), vec in table.vectors.items():
            f.write(f"{key}\t{idx}\t{','.join(repr(float(x)) for x in vec)}\n")


def _cache_path(cache_dir: Path, model_id: str, text: str) -> Path:
    digest = hashlib.sha256(f"{model_id}\x00{text}".encode("utf-8")).hexdigest()
    return cache_dir / f"{digest}.json"


def embed_via_sidecar(
    tokens: list[str],
    endpoint: str,
    model_id: str = "mock",
    cache_dir: str | Path | None = None,
    timeout_s: float = 30.0,
) -> list[np.ndarray]:
    """Fetch per-token vectors over HTTP, with an on-disk cache keyed by
    (model_id, text). A cache hit never touches the network; an unreachable
    service raises SidecarUnavailableError."""
    text = " ".join(tokens)
    cache_file = None
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        cache_file = _cache_path(cache_dir, model_id, text)
        if cache_file.exists():
            payload = json.loads(cache_file.read_text(encoding="utf-8"))
            return [
                _unit(np.array(v, dtype=np.float64), "cache") for v in payload["vectors"]
            ]

    url = endpoint.rstrip("/") + "/embed"
    try:
        resp = requests.post(url, json={"model": model_id, "text": text}, timeout=timeout_s)
    except requests.RequestException as e:
        raise SidecarUnavailableError(f"embedding service unreachable at {url}: {e}") from e
    if resp.status_code != 200:
        raise ToolkitError(f"embedding service returned {resp.status_code}: {resp.text[:200]}")
    payload = resp.json()
    for key in ("dim", "tokens", "vectors"):
        if key not in payload:
            raise ToolkitError(f"embedding response missing {key!r}")
    if cache_file is not None:
        tmp = cache_file.with_suffix(".tmp")
        tmp.write_text(
            json.dumps({"model": model_id, "text": text, **payload}), encoding="utf-8"
        )
        tmp.replace(cache_file)  # atomic, so concurrent readers see full files
    return [_unit(np.array(v, dtype=np.float64), url) for v in payload["vectors"]]
