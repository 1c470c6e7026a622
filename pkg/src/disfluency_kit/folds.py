"""Speaker-level cross-validation folds.

Assignment happens at the speaker level so no speaker's audio appears on both
sides of a split. The speaker list is sorted, shuffled by the "split"
substream of the top-level seed, and chunked; the fold file records k, the
seed, and the speaker groups so a split can be committed and replayed.
"""

import json
from dataclasses import dataclass
from pathlib import Path

from .chat_corpus import Corpus, Utterance
from .errors import ToolkitError
from .rng import substream


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    seed: int
    fold_of_speaker: dict[str, int]

    def speakers_in_fold(self, fold: int) -> list[str]:
        if not (0 <= fold < self.k):
            raise ToolkitError(f"fold {fold} out of range for k={self.k}")
        return sorted(s for s, f in self.fold_of_speaker.items() if f == fold)

    def folds(self) -> list[list[str]]:
        return [self.speakers_in_fold(i) for i in range(self.k)]


def assign_folds(
    corpus: Corpus, k: int = 6, speakers_per_fold: int = 2, seed: int = 0
) -> FoldAssignment:
    if k < 2:
        raise ToolkitError(f"k must be >= 2, got {k}")
    if speakers_per_fold < 1:
        raise ToolkitError("speakers_per_fold must be >= 1")
    speakers = corpus.speaker_ids()
    need = k * speakers_per_fold
    if len(speakers) != need:
        raise ToolkitError(
            f"cannot split {len(speakers)} speakers into {k} folds of "
            f"{speakers_per_fold} (needs exactly {need})"
        )
    rng = substream(seed, "split")
    shuffled = list(speakers)
    rng.shuffle(shuffled)
    assignment = {}
    for fold in range(k):
        for s in shuffled[fold * speakers_per_fold : (fold + 1) * speakers_per_fold]:
            assignment[s] = fold
    return FoldAssignment(k=k, seed=seed, fold_of_speaker=assignment)


def held_out_utterances(corpus: Corpus, fa: FoldAssignment, fold: int) -> list[Utterance]:
    members = set(fa.speakers_in_fold(fold))
    return [u for u in corpus.utterances if u.speaker_id in members]


def training_pool(corpus: Corpus, fa: FoldAssignment, test_fold: int) -> list[Utterance]:
    """Everything outside the held-out fold; disjoint from its speakers."""
    members = set(fa.speakers_in_fold(test_fold))
    unknown = sorted({u.speaker_id for u in corpus.utterances} - set(fa.fold_of_speaker))
    if unknown:
        raise ToolkitError(f"corpus has speakers outside the fold assignment: {unknown}")
    return [u for u in corpus.utterances if u.speaker_id not in members]


def sample_with_replacement(pool: list, n: int, seed: int = 0) -> list:
    """n i.i.d. uniform draws from pool; deterministic for a given seed."""
    if not pool:
        raise ToolkitError("cannot sample from an empty pool")
    if n < 0:
        raise ToolkitError("n must be >= 0")
    rng = substream(seed, "sample")
    return [pool[rng.randint(0, len(pool) - 1)] for _ in range(n)]


def save_fold_file(fa: FoldAssignment, path: str | Path) -> None:
    payload = {"k": fa.k, "seed": fa.seed, "folds": fa.folds()}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_fold_file(path: str | Path) -> FoldAssignment:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("k", "seed", "folds"):
        if key not in d:
            raise ToolkitError(f"{path}: fold file missing {key!r}")
    folds = d["folds"]
    if len(folds) != d["k"]:
        raise ToolkitError(f"{path}: fold file lists {len(folds)} folds but k={d['k']}")
    assignment: dict[str, int] = {}
    for i, members in enumerate(folds):
        for s in members:
            if s in assignment:
                raise ToolkitError(f"{path}: speaker {s} appears in two folds")
            assignment[s] = i
    return FoldAssignment(k=d["k"], seed=d["seed"], fold_of_speaker=assignment)
