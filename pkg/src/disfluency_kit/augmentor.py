"""Synthetic disfluency injection.

Fluent token sequences are turned into disfluent ones by one of three
operations per output utterance: repeating single words, repeating a phrase,
or inserting filler words. All counts are drawn uniformly from inclusive
integer ranges; every range's upper bound is first clipped to the fluent
length, so a two-word utterance can never receive more than two of anything.
When an utterance is too short to hold the smallest allowed phrase, the plan
degrades to a one-word repetition and says so.

Emitted events span exactly the inserted tokens (the non-final renditions),
so deleting every event-covered position recovers the fluent input, and the
fluent input is always a subsequence of the augmented output.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .chat_corpus import Corpus, DisfluencyEvent, DisfluencyKind, derive_fluent_text
from .errors import FluentEmptyError, PlanMismatchError, ToolkitError
from .rng import SplitMix64, substream

AUGMENTABLE_KINDS = (
    DisfluencyKind.WORD_REPETITION,
    DisfluencyKind.PHRASE_REPETITION,
    DisfluencyKind.INTERJECTION,
)


@dataclass(frozen=True)
class IntRange:
    """Inclusive integer range."""

    lo: int
    hi: int

    def __post_init__(self):
        if not (1 <= self.lo <= self.hi):
            raise ValueError(f"range must satisfy 1 <= lo <= hi, got [{self.lo}, {self.hi}]")

    def clipped(self, cap: int) -> "IntRange":
        hi = min(self.hi, cap)
        return IntRange(min(self.lo, hi), hi)

    def draw(self, rng: SplitMix64) -> int:
        return rng.randint(self.lo, self.hi)

    def contains(self, v: int) -> bool:
        return self.lo <= v <= self.hi


@dataclass(frozen=True)
class WordRepetitionRanges:
    n_words: IntRange
    n_repeats: IntRange


@dataclass(frozen=True)
class PhraseRepetitionRanges:
    phrase_len: IntRange
    n_repeats: IntRange


@dataclass(frozen=True)
class InterjectionRanges:
    n_sites: IntRange
    n_repeats: IntRange
    lexicon: tuple[str, ...] = ("uh", "um")

    def __post_init__(self):
        if not self.lexicon:
            raise ValueError("interjection lexicon must be non-empty")


@dataclass(frozen=True)
class AugmentationProfile:
    name: str
    word_rep: WordRepetitionRanges
    phrase_rep: PhraseRepetitionRanges
    interjection: InterjectionRanges


STANDARD_PROFILE = AugmentationProfile(
    name="standard",
    word_rep=WordRepetitionRanges(n_words=IntRange(1, 3), n_repeats=IntRange(1, 4)),
    phrase_rep=PhraseRepetitionRanges(phrase_len=IntRange(2, 4), n_repeats=IntRange(1, 3)),
    interjection=InterjectionRanges(n_sites=IntRange(1, 4), n_repeats=IntRange(1, 4)),
)

# Same shape selections, wider repeat counts for heavier stuttering.
EXTENDED_PROFILE = AugmentationProfile(
    name="extended",
    word_rep=WordRepetitionRanges(n_words=IntRange(1, 3), n_repeats=IntRange(1, 6)),
    phrase_rep=PhraseRepetitionRanges(phrase_len=IntRange(2, 4), n_repeats=IntRange(1, 5)),
    interjection=InterjectionRanges(n_sites=IntRange(1, 4), n_repeats=IntRange(1, 7)),
)

PROFILES = {p.name: p for p in (STANDARD_PROFILE, EXTENDED_PROFILE)}


def clip_profile(profile: AugmentationProfile, fluent_len: int) -> AugmentationProfile:
    """Clip every range's upper bound to the fluent length."""
    if fluent_len < 1:
        raise ValueError("fluent_len must be >= 1")
    return AugmentationProfile(
        name=profile.name,
        word_rep=WordRepetitionRanges(
            n_words=profile.word_rep.n_words.clipped(fluent_len),
            n_repeats=profile.word_rep.n_repeats.clipped(fluent_len),
        ),
        phrase_rep=PhraseRepetitionRanges(
            phrase_len=profile.phrase_rep.phrase_len.clipped(fluent_len),
            n_repeats=profile.phrase_rep.n_repeats.clipped(fluent_len),
        ),
        interjection=InterjectionRanges(
            n_sites=profile.interjection.n_sites.clipped(fluent_len),
            n_repeats=profile.interjection.n_repeats.clipped(fluent_len),
            lexicon=profile.interjection.lexicon,
        ),
    )


@dataclass(frozen=True)
class Selection:
    """One placement inside a plan.

    word repetition:  position = word index, length = 1, token = None
    phrase repetition: position = phrase start, length = phrase length
    interjection:      position = insertion slot in [0, len(fluent)], length = 0,
                       token = the filler; repeat_count is the number of copies
    """

    position: int
    repeat_count: int
    length: int = 1
    token: str | None = None


@dataclass(frozen=True)
class AugmentationPlan:
    source_utterance_id: str
    event_type: DisfluencyKind
    selections: tuple[Selection, ...]
    seed: int
    degraded: bool = False  # phrase request shrunk to a 1-word repetition


def sample_plan(
    fluent: list[str],
    profile: AugmentationProfile,
    event_type: DisfluencyKind,
    rng: SplitMix64,
    source_utterance_id: str = "",
) -> AugmentationPlan:
    if not fluent:
        raise ValueError("cannot plan augmentation for an empty token sequence")
    if event_type not in AUGMENTABLE_KINDS:
        raise ValueError(f"{event_type} is not an augmentable disfluency kind")
    m = len(fluent)
    p = clip_profile(profile, m)
    degraded = False

    if event_type == DisfluencyKind.PHRASE_REPETITION and m < profile.phrase_rep.phrase_len.lo:
        event_type = DisfluencyKind.WORD_REPETITION
        degraded = True

    if event_type == DisfluencyKind.WORD_REPETITION:
        n_words = 1 if degraded else p.word_rep.n_words.draw(rng)
        positions = sorted(rng.sample_indices(m, n_words))
        selections = tuple(
            Selection(position=pos, repeat_count=p.word_rep.n_repeats.draw(rng))
            for pos in positions
        )
    elif event_type == DisfluencyKind.PHRASE_REPETITION:
        length = p.phrase_rep.phrase_len.draw(rng)
        start = rng.randint(0, m - length)
        selections = (
            Selection(position=start, length=length, repeat_count=p.phrase_rep.n_repeats.draw(rng)),
        )
    else:
        n_sites = p.interjection.n_sites.draw(rng)
        slots = sorted(rng.sample_indices(m + 1, n_sites))
        selections = tuple(
            Selection(
                position=slot,
                length=0,
                token=rng.choice(p.interjection.lexicon),
                repeat_count=p.interjection.n_repeats.draw(rng),
            )
            for slot in slots
        )

    return AugmentationPlan(
        source_utterance_id=source_utterance_id,
        event_type=event_type,
        selections=selections,
        seed=rng.seed,
        degraded=degraded,
    )


@dataclass
class AugmentedUtterance:
    id: str
    plan: AugmentationPlan
    verbatim_tokens: list[str]
    fluent_tokens: list[str]
    events: list[DisfluencyEvent] = field(default_factory=list)

    def __post_init__(self):
        # events must exactly describe the inserted material
        covered: set[int] = set()
        for e in self.events:
            covered.update(range(e.token_span[0], e.token_span[1]))
        recovered = [t for i, t in enumerate(self.verbatim_tokens) if i not in covered]
        if recovered != self.fluent_tokens:
            raise ValueError(
                f"augmented utterance {self.id}: deleting event spans does not recover the input"
            )


def apply_plan(fluent: list[str], plan: AugmentationPlan, uid: str = "aug") -> AugmentedUtterance:
    """Deterministically realize a plan. Raises PlanMismatchError when the plan
    does not fit the given token sequence."""
    m = len(fluent)
    for s in plan.selections:
        limit = m if plan.event_type == DisfluencyKind.INTERJECTION else m - s.length
        if not (0 <= s.position <= limit):
            raise PlanMismatchError(
                f"selection at {s.position} (length {s.length}) does not fit {m} tokens"
            )
        if plan.event_type == DisfluencyKind.INTERJECTION and not s.token:
            raise PlanMismatchError("interjection selection without a token")

    out: list[str] = []
    events: list[DisfluencyEvent] = []
    if plan.event_type == DisfluencyKind.INTERJECTION:
        by_slot = {s.position: s for s in plan.selections}
        if len(by_slot) != len(plan.selections):
            raise PlanMismatchError("duplicate interjection slots")
        for i in range(m + 1):
            s = by_slot.get(i)
            if s is not None:
                start = len(out)
                out.extend([s.token] * s.repeat_count)
                events.append(DisfluencyEvent(DisfluencyKind.INTERJECTION, (start, len(out))))
            if i < m:
                out.append(fluent[i])
    else:
        sels = sorted(plan.selections, key=lambda s: s.position)
        for a, b in zip(sels, sels[1:]):
            if a.position + a.length > b.position:
                raise PlanMismatchError("overlapping repetition selections")
        cursor = 0
        for s in sels:
            out.extend(fluent[cursor : s.position])
            segment = fluent[s.position : s.position + s.length]
            start = len(out)
            for _ in range(s.repeat_count):
                out.extend(segment)
            events.append(
                DisfluencyEvent(plan.event_type, (start, len(out)), repeat_count=s.repeat_count)
            )
            out.extend(segment)  # the final, kept rendition
            cursor = s.position + s.length
        out.extend(fluent[cursor:])

    return AugmentedUtterance(
        id=uid,
        plan=plan,
        verbatim_tokens=out,
        fluent_tokens=list(fluent),
        events=events,
    )


def _normalized_weights(type_weights: dict[DisfluencyKind, float] | None) -> list[float]:
    if type_weights is None:
        return [1.0, 1.0, 1.0]
    unknown = set(type_weights) - set(AUGMENTABLE_KINDS)
    if unknown:
        raise ToolkitError(f"type_weights for non-augmentable kinds: {sorted(k.value for k in unknown)}")
    weights = [float(type_weights.get(k, 0.0)) for k in AUGMENTABLE_KINDS]
    if any(w < 0 for w in weights):
        raise ToolkitError("type_weights must be non-negative")
    if sum(weights) <= 0:
        raise ToolkitError("type_weights must sum to a positive value")
    return weights


def eligible_pool(corpus: Corpus) -> list[tuple[str, list[str]]]:
    """(utterance id, fluent tokens) pairs for utterances with fluent material."""
    pool = []
    for u in corpus.utterances:
        try:
            pool.append((u.id, derive_fluent_text(u)))
        except FluentEmptyError:
            continue
    return pool


def augment_corpus(
    corpus: Corpus,
    n: int,
    profile: AugmentationProfile,
    type_weights: dict[DisfluencyKind, float] | None = None,
    seed: int = 0,
) -> list[AugmentedUtterance]:
    """Draw n augmented utterances. Sources are picked i.i.d. with replacement;
    each output index gets its own substream, so results do not depend on
    generation order and are byte-stable across platforms."""
    if n < 0:
        raise ValueError("n must be >= 0")
    pool = eligible_pool(corpus)
    if not pool and n > 0:
        raise ToolkitError("no utterances with a non-empty fluent rendition to augment")
    weights = _normalized_weights(type_weights)

    out: list[AugmentedUtterance] = []
    for i in range(n):
        rng = substream(seed, "augment", i)
        source_id, fluent = pool[rng.randint(0, len(pool) - 1)]
        event_type = rng.weighted_choice(list(AUGMENTABLE_KINDS), weights)
        plan = sample_plan(fluent, profile, event_type, rng, source_utterance_id=source_id)
        out.append(apply_plan(fluent, plan, uid=f"aug-{i:05d}"))
    return out


def compute_p(n: int, corpus_size: int) -> int:
    """Augmentation amount as a percentage of corpus size, rounded half up."""
    if corpus_size <= 0:
        raise ValueError("corpus_size must be positive")
    if n < 0:
        raise ValueError("n must be >= 0")
    return (200 * n + corpus_size) // (2 * corpus_size)


def save_augmented(items: list[AugmentedUtterance], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for a in items:
            row = {
                "id": a.id,
                "source_utterance_id": a.plan.source_utterance_id,
                "event_type": a.plan.event_type.value,
                "seed": a.plan.seed,
                "verbatim_text": " ".join(a.verbatim_tokens),
                "fluent_text": " ".join(a.fluent_tokens),
                "events": [e.to_dict() for e in a.events],
            }
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_augmented_rows(path: str | Path) -> list[dict]:
    """Rows as written by save_augmented (used for manifest building and eval)."""
    rows = []
    with Path(path).open("r", encoding="utf-8") as f:
        for i, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            for key in ("id", "source_utterance_id", "event_type", "seed", "verbatim_text", "fluent_text"):
                if key not in row:
                    raise ToolkitError(f"{path}:{i}: augmented row missing {key!r}")
            rows.append(row)
    ids = [r["id"] for r in rows]
    if len(ids) != len(set(ids)):
        raise ToolkitError(f"{path}: duplicate augmented utterance ids")
    return rows
