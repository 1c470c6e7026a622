"""CHAT-style transcript parsing and the corpus data model.

Supported grammar (a deliberate subset of the CHAT transcription format):

    *XXX:<tab>...        speaker tier; XXX is the tier code
    @...                 header tier, skipped except @ID rows (demographics)
    %...                 dependent annotation tier, skipped
    &-word               filled pause, kept as a token, Interjection event
    &+frag               phonological fragment, kept as a token, Fragment event
    word [/]             single-word repetition (the marked rendition is the
                         discarded one; the final rendition follows in text)
    <w1 ... wn> [/]      grouped repetition; 1 word inside -> WordRepetition,
                         2 or more -> PhraseRepetition
    word [//], <...> [//] retracing; the marked material was revised
    (.) (..) (...)       pauses, kept as tokens, Pause event
    . ? !                terminal punctuation, dropped
    \\x15NNN_NNN\\x15      time alignment in ms, summed into duration_s

Consecutive identical repetition marks accumulate into one event
(``my [/] my [/] my`` is a single WordRepetition with repeat_count 2).
Repetition and retracing events span the non-final renditions, so deleting
every event-covered position from verbatim_tokens yields the fluent text.

Anything else is never silently dropped: unsupported bracket codes attach an
Other event to the preceding word or group, marker-only forms (``&=laughs``,
``+//.``) produce an empty-span Other event, and every such case appends to
the warning list returned next to the corpus.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import ChatParseError, FluentEmptyError, ToolkitError

log = logging.getLogger(__name__)


class Setting(str, Enum):
    READING = "reading"
    INTERVIEW = "interview"
    SYNTHETIC = "synthetic"


class DisfluencyKind(str, Enum):
    WORD_REPETITION = "word_repetition"
    PHRASE_REPETITION = "phrase_repetition"
    INTERJECTION = "interjection"
    RETRACING = "retracing"
    FRAGMENT = "fragment"
    PAUSE = "pause"
    OTHER = "other"


REPETITION_KINDS = frozenset({DisfluencyKind.WORD_REPETITION, DisfluencyKind.PHRASE_REPETITION})

# Kinds whose spans are removed when deriving the fluent rendition. Other is
# deliberately absent: unknown material is retained, not guessed at.
_REMOVED_IN_FLUENT = frozenset(
    {
        DisfluencyKind.WORD_REPETITION,
        DisfluencyKind.PHRASE_REPETITION,
        DisfluencyKind.INTERJECTION,
        DisfluencyKind.RETRACING,
        DisfluencyKind.FRAGMENT,
        DisfluencyKind.PAUSE,
    }
)


@dataclass
class DisfluencyEvent:
    kind: DisfluencyKind
    token_span: tuple[int, int]  # half-open [start, end) into verbatim_tokens
    repeat_count: int = 0  # renditions beyond the final one; 0 when not applicable
    code: str | None = None  # original bracket code for kind == OTHER

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind.value,
            "token_span": [self.token_span[0], self.token_span[1]],
            "repeat_count": self.repeat_count,
        }
        if self.code is not None:
            d["code"] = self.code
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DisfluencyEvent":
        return cls(
            kind=DisfluencyKind(d["kind"]),
            token_span=(int(d["token_span"][0]), int(d["token_span"][1])),
            repeat_count=int(d.get("repeat_count", 0)),
            code=d.get("code"),
        )


@dataclass
class Utterance:
    id: str
    speaker_id: str
    video_id: str
    setting: Setting
    verbatim_tokens: list[str]
    events: list[DisfluencyEvent] = field(default_factory=list)
    duration_s: float | None = None

    def __post_init__(self):
        if not self.verbatim_tokens:
            raise ValueError(f"utterance {self.id}: verbatim_tokens must be non-empty")
        n = len(self.verbatim_tokens)
        for e in self.events:
            s, t = e.token_span
            if not (0 <= s <= t <= n):
                raise ValueError(f"utterance {self.id}: event span {e.token_span} outside [0, {n}]")
            if e.kind in REPETITION_KINDS and e.repeat_count < 1:
                raise ValueError(f"utterance {self.id}: repetition event needs repeat_count >= 1")
        # nesting and disjointness allowed, partial overlap is not
        open_spans: list[tuple[int, int]] = []
        for s, t in sorted(e.token_span for e in self.events):
            while open_spans and open_spans[-1][1] <= s:
                open_spans.pop()
            if open_spans and t > open_spans[-1][1]:
                raise ValueError(f"utterance {self.id}: partially overlapping event spans")
            open_spans.append((s, t))
        starts = [e.token_span[0] for e in self.events]
        if starts != sorted(starts):
            raise ValueError(f"utterance {self.id}: events must be sorted by span start")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "speaker_id": self.speaker_id,
            "video_id": self.video_id,
            "setting": self.setting.value,
            "verbatim_tokens": list(self.verbatim_tokens),
            "events": [e.to_dict() for e in self.events],
            "duration_s": self.duration_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Utterance":
        return cls(
            id=d["id"],
            speaker_id=d["speaker_id"],
            video_id=d["video_id"],
            setting=Setting(d["setting"]),
            verbatim_tokens=list(d["verbatim_tokens"]),
            events=[DisfluencyEvent.from_dict(e) for e in d.get("events", [])],
            duration_s=d.get("duration_s"),
        )


@dataclass
class SpeakerInfo:
    age: int | None = None
    gender: str = ""


@dataclass
class Corpus:
    utterances: list[Utterance]
    speakers: dict[str, SpeakerInfo] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for u in self.utterances:
            if u.id in seen:
                raise ValueError(f"duplicate utterance id {u.id!r}")
            seen.add(u.id)
        if self.speakers:
            missing = sorted({u.speaker_id for u in self.utterances} - set(self.speakers))
            if missing:
                raise ValueError(f"speakers missing demographics entries: {missing}")

    def speaker_ids(self) -> list[str]:
        return sorted({u.speaker_id for u in self.utterances})


@dataclass
class SourceMeta:
    """Provenance for one transcript document. speaker_map rewrites tier codes
    to corpus-global speaker ids; unmapped codes default to video_id-tier so
    the same code in two documents never collides."""

    video_id: str
    setting: Setting
    speaker_map: dict[str, str] | None = None

    def resolve_speaker(self, tier_code: str) -> str:
        if self.speaker_map and tier_code in self.speaker_map:
            return self.speaker_map[tier_code]
        return f"{self.video_id}-{tier_code}"


_TIME_RX = re.compile(r"\x15(\d+)_(\d+)\x15")
_PAUSE_RX = re.compile(r"^\(\.{1,3}\)$")
_PAREN_CODE_RX = re.compile(r"^\([^()]*\)$")
_TERMINATORS = {".", "?", "!"}
_WORD_BREAKERS = {"<", ">", "[", "]"}


def _scan_items(body: str, line_no: int) -> list[tuple[str, object]]:
    """Split a tier body into (kind, value) items: word, group, code."""
    items: list[tuple[str, object]] = []
    i, n = 0, len(body)
    while i < n:
        c = body[i]
        if c.isspace():
            i += 1
        elif c == "<":
            j = i + 1
            while j < n and body[j] != ">":
                if body[j] == "<":
                    raise ChatParseError("nested '<' group", line_no)
                j += 1
            if j >= n:
                raise ChatParseError("unbalanced '<'", line_no)
            items.append(("group", body[i + 1 : j].split()))
            i = j + 1
        elif c == ">":
            raise ChatParseError("unbalanced '>'", line_no)
        elif c == "[":
            j = body.find("]", i)
            if j < 0:
                raise ChatParseError("unbalanced '['", line_no)
            items.append(("code", body[i + 1 : j].strip()))
            i = j + 1
        elif c == "]":
            raise ChatParseError("unbalanced ']'", line_no)
        else:
            j = i
            while j < n and not body[j].isspace() and body[j] not in _WORD_BREAKERS:
                j += 1
            items.append(("word", body[i:j]))
            i = j
    return items


class _UtteranceBuilder:
    """Accumulates tokens and events for one tier line."""

    def __init__(self, line_no: int, warnings: list[str]):
        self.line_no = line_no
        self.warnings = warnings
        self.tokens: list[str] = []
        self.events: list[DisfluencyEvent] = []
        self.last_span: tuple[int, int] | None = None  # scope for trailing codes
        # (event index, rendition token tuple) eligible for [/] accumulation
        self.pending_rep: tuple[int, tuple[str, ...]] | None = None

    def warn(self, msg: str) -> None:
        self.warnings.append(f"line {self.line_no}: {msg}")

    def _emit_word(self, w: str) -> None:
        """Emit one whitespace word: classify prefixes, append token + event."""
        pos = len(self.tokens)
        if w in _TERMINATORS:
            return
        if _PAUSE_RX.match(w):
            self.tokens.append(w)
            self.events.append(DisfluencyEvent(DisfluencyKind.PAUSE, (pos, pos + 1)))
            self.last_span = (pos, pos + 1)
            return
        if _PAREN_CODE_RX.match(w):
            # e.g. timed pauses like (2.5): not in the supported subset
            self.events.append(DisfluencyEvent(DisfluencyKind.OTHER, (pos, pos), code=w))
            self.warn(f"unsupported parenthesized code {w}")
            return
        if w.startswith("&-") or w.startswith("&+"):
            bare = w[2:]
            if not bare:
                self.warn(f"empty marker {w!r}")
                return
            kind = DisfluencyKind.INTERJECTION if w[1] == "-" else DisfluencyKind.FRAGMENT
            self.tokens.append(bare)
            self.events.append(DisfluencyEvent(kind, (pos, pos + 1)))
            self.last_span = (pos, pos + 1)
            return
        if w.startswith("&="):
            # nonverbal action marker, nothing was spoken
            self.events.append(DisfluencyEvent(DisfluencyKind.OTHER, (pos, pos), code=w))
            self.warn(f"unsupported marker {w}")
            return
        if w.startswith("&") or w.startswith("+"):
            bare = w.lstrip("&+")
            if any(ch.isalnum() for ch in bare):
                self.tokens.append(bare)
                self.events.append(DisfluencyEvent(DisfluencyKind.OTHER, (pos, pos + 1), code=w))
                self.last_span = (pos, pos + 1)
            else:
                self.events.append(DisfluencyEvent(DisfluencyKind.OTHER, (pos, pos), code=w))
            self.warn(f"unsupported marker {w}")
            return
        self.tokens.append(w)
        self.last_span = (pos, pos + 1)

    def emit_words(self, words: list[str]) -> tuple[int, int]:
        start = len(self.tokens)
        for w in words:
            self._emit_word(w)
        return (start, len(self.tokens))

    def handle_marked(self, words: list[str], mark: str) -> None:
        """Material followed by [/] or [//]."""
        start, end = self.emit_words(words)
        if end == start:
            self.warn(f"[{mark}] on empty material")
            self.pending_rep = None
            return
        self.last_span = (start, end)
        if mark == "//":
            self.events.append(DisfluencyEvent(DisfluencyKind.RETRACING, (start, end)))
            self.pending_rep = None
            return
        content = tuple(self.tokens[start:end])
        kind = (
            DisfluencyKind.WORD_REPETITION
            if end - start == 1
            else DisfluencyKind.PHRASE_REPETITION
        )
        if self.pending_rep is not None:
            idx, prev_content = self.pending_rep
            prev = self.events[idx]
            if prev.kind == kind and prev_content == content and prev.token_span[1] == start:
                prev.token_span = (prev.token_span[0], end)
                prev.repeat_count += 1
                return
        self.events.append(DisfluencyEvent(kind, (start, end), repeat_count=1))
        self.pending_rep = (len(self.events) - 1, content)

    def handle_unsupported_code(self, code: str) -> None:
        span = self.last_span if self.last_span is not None else (len(self.tokens), len(self.tokens))
        self.events.append(DisfluencyEvent(DisfluencyKind.OTHER, span, code=code))
        self.warn(f"unsupported code [{code}]")


def _parse_tier_body(body: str, line_no: int, warnings: list[str]):
    """Returns (tokens, events, duration_s) for one speaker tier body."""
    duration = 0.0
    saw_time = False
    for m in _TIME_RX.finditer(body):
        start_ms, end_ms = int(m.group(1)), int(m.group(2))
        duration += max(0, end_ms - start_ms) / 1000.0
        saw_time = True
    body = _TIME_RX.sub(" ", body)

    b = _UtteranceBuilder(line_no, warnings)
    items = _scan_items(body, line_no)
    k = 0
    while k < len(items):
        kind, val = items[k]
        nxt = items[k + 1] if k + 1 < len(items) else None
        if kind in ("word", "group"):
            words = val if kind == "group" else [val]
            if nxt is not None and nxt[0] == "code" and nxt[1] in ("/", "//"):
                b.handle_marked(list(words), str(nxt[1]))
                k += 2
                continue
            if kind == "group":
                b.warn("angle group without a following code")
            b.emit_words(list(words))
            b.pending_rep = None
            k += 1
        else:  # standalone code
            code = str(val)
            if code in ("/", "//"):
                b.warn(f"[{code}] without preceding material")
            else:
                b.handle_unsupported_code(code)
            b.pending_rep = None
            k += 1

    events = sorted(b.events, key=lambda e: (e.token_span[0], -e.token_span[1]))
    return b.tokens, events, (duration if saw_time else None)


_AGE_RX = re.compile(r"^(\d+)")


def _parse_id_header(value: str, line_no: int, warnings: list[str]):
    """@ID: lang|corpus|code|age|sex|group|SES|role|education|custom|"""
    fields = [f.strip() for f in value.split("|")]
    if len(fields) < 5:
        warnings.append(f"line {line_no}: short @ID row, expected pipe-separated fields")
        return None
    code = fields[2]
    if not code:
        warnings.append(f"line {line_no}: @ID row without a participant code")
        return None
    m = _AGE_RX.match(fields[3])
    age = int(m.group(1)) if m else None
    return code, SpeakerInfo(age=age, gender=fields[4])


def parse_chat(document: str, source_meta: SourceMeta) -> tuple[Corpus, list[str]]:
    """Parse one transcript document into a Corpus plus a warning list.

    Raises ChatParseError (with a line number) on malformed tiers, unbalanced
    angle groups or bracket codes, empty utterances, and empty documents.
    """
    if not document.strip():
        raise ChatParseError("empty document")

    # merge continuation lines (leading tab) into the tier they extend
    merged: list[tuple[int, str]] = []
    for no, line in enumerate(document.splitlines(), 1):
        if line.startswith("\t") and merged:
            prev_no, prev = merged[-1]
            merged[-1] = (prev_no, prev + " " + line.strip())
        else:
            merged.append((no, line))

    warnings: list[str] = []
    utterances: list[Utterance] = []
    speakers: dict[str, SpeakerInfo] = {}
    seq = 0
    for no, line in merged:
        if not line.strip():
            continue
        if line.startswith("@"):
            head, _, value = line.partition(":")
            if head.strip() == "@ID":
                parsed = _parse_id_header(value.strip(), no, warnings)
                if parsed is not None:
                    code, info = parsed
                    speakers[source_meta.resolve_speaker(code)] = info
            continue
        if line.startswith("%"):
            continue
        if line.startswith("*"):
            if ":" not in line:
                raise ChatParseError("malformed tier (no ':' separator)", no)
            tier, _, body = line[1:].partition(":")
            tier = tier.strip()
            if not tier:
                raise ChatParseError("malformed tier (empty speaker code)", no)
            tokens, events, duration = _parse_tier_body(body.strip(), no, warnings)
            if not tokens:
                raise ChatParseError("empty utterance", no)
            utterances.append(
                Utterance(
                    id=f"{source_meta.video_id}-u{seq:04d}",
                    speaker_id=source_meta.resolve_speaker(tier),
                    video_id=source_meta.video_id,
                    setting=source_meta.setting,
                    verbatim_tokens=tokens,
                    events=events,
                    duration_s=duration,
                )
            )
            seq += 1
            continue
        warnings.append(f"line {no}: skipped unrecognized line: {line.strip()[:40]!r}")

    if speakers:
        for sid in sorted({u.speaker_id for u in utterances}):
            if sid not in speakers:
                warnings.append(f"no @ID demographics for speaker {sid}, filled with blanks")
                speakers[sid] = SpeakerInfo()
    return Corpus(utterances=utterances, speakers=speakers), warnings


def derive_fluent_text(u: Utterance) -> list[str]:
    """The intended fluent token sequence: fillers, fragments, and pauses are
    dropped, and only the final rendition of repeated or retraced material is
    kept. Raises FluentEmptyError when nothing remains."""
    remove: set[int] = set()
    for e in u.events:
        if e.kind in _REMOVED_IN_FLUENT:
            remove.update(range(e.token_span[0], e.token_span[1]))
    out = [t for i, t in enumerate(u.verbatim_tokens) if i not in remove]
    if not out:
        raise FluentEmptyError(f"utterance {u.id} has no fluent material")
    return out


def classify_disfluencies(u: Utterance) -> set[DisfluencyKind]:
    return {e.kind for e in u.events}


def corpus_stats(c: Corpus) -> dict:
    """Descriptive statistics; percentages are rounded to one decimal."""
    n = len(c.utterances)
    if n == 0:
        raise ToolkitError("cannot compute stats for an empty corpus")
    with_rep = sum(1 for u in c.utterances if classify_disfluencies(u) & REPETITION_KINDS)
    with_int = sum(
        1 for u in c.utterances if DisfluencyKind.INTERJECTION in classify_disfluencies(u)
    )
    per_speaker: dict[str, int] = {}
    for u in c.utterances:
        per_speaker[u.speaker_id] = per_speaker.get(u.speaker_id, 0) + 1
    return {
        "n_utterances": n,
        "total_duration_s": round(sum(u.duration_s or 0.0 for u in c.utterances), 3),
        "pct_with_repetition": round(100.0 * with_rep / n, 1),
        "pct_with_interjection": round(100.0 * with_int / n, 1),
        "per_speaker_counts": dict(sorted(per_speaker.items())),
    }


def _speakers_sidecar(path: Path) -> Path:
    return path.with_suffix(".speakers.json")


def save_corpus(c: Corpus, path: str | Path) -> None:
    """One utterance object per JSONL line; demographics, when present, go to
    a sibling .speakers.json so the line format stays uniform."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for u in c.utterances:
            f.write(json.dumps(u.to_dict(), ensure_ascii=False) + "\n")
    side = _speakers_sidecar(path)
    if c.speakers:
        payload = {
            sid: {"age": info.age, "gender": info.gender}
            for sid, info in sorted(c.speakers.items())
        }
        side.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    elif side.exists():
        side.unlink()


def load_corpus(path: str | Path) -> Corpus:
    path = Path(path)
    utterances = []
    with path.open("r", encoding="utf-8") as f:
        for i, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                utterances.append(Utterance.from_dict(json.loads(line)))
            except (KeyError, ValueError, TypeError) as e:
                raise ToolkitError(f"{path}:{i}: bad corpus row: {e}") from e
    speakers: dict[str, SpeakerInfo] = {}
    side = _speakers_sidecar(path)
    if side.exists():
        for sid, d in json.loads(side.read_text(encoding="utf-8")).items():
            speakers[sid] = SpeakerInfo(age=d.get("age"), gender=d.get("gender", ""))
    return Corpus(utterances=utterances, speakers=speakers)


def merge_corpora(parts: list[Corpus]) -> Corpus:
    utterances: list[Utterance] = []
    speakers: dict[str, SpeakerInfo] = {}
    for c in parts:
        utterances.extend(c.utterances)
        for sid, info in c.speakers.items():
            if sid in speakers and speakers[sid] != info:
                raise ToolkitError(f"conflicting demographics for speaker {sid}")
            speakers[sid] = info
    return Corpus(utterances=utterances, speakers=speakers)
