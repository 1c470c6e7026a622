"""Run evaluation, bias deltas, breakdowns, and rendering.

A condition is one (references, hypotheses) scoring run. Corpus word error
rate is pooled, sum(S + D + I) / sum(S + D + C) over utterances, never a mean
of rates; per-utterance rows are kept so any breakdown can re-pool them. The
bias report subtracts a non-disfluent condition from a disfluent one, so a
positive delta always reads "worse on disfluent speech".

Rendering: json is lossless, markdown and csv print 4-decimal cells (markdown
drops the leading zero, matching the usual table style for these metrics).
"""

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .chat_corpus import (
    Corpus,
    DisfluencyKind,
    REPETITION_KINDS,
    classify_disfluencies,
)
from .errors import EmptyReferenceError, ToolkitError
from .metrics import align, bertscore, normalize, wer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UtteranceScore:
    utterance_id: str
    wer: float
    f1_rescaled: float
    S: int
    D: int
    I: int
    C: int

    def to_dict(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "wer": self.wer,
            "f1_rescaled": self.f1_rescaled,
            "S": self.S,
            "D": self.D,
            "I": self.I,
            "C": self.C,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UtteranceScore":
        return cls(
            utterance_id=d["utterance_id"],
            wer=float(d["wer"]),
            f1_rescaled=float(d["f1_rescaled"]),
            S=int(d["S"]),
            D=int(d["D"]),
            I=int(d["I"]),
            C=int(d["C"]),
        )


@dataclass
class ConditionResult:
    condition: str
    baseline_b: float
    pooled_wer: float
    mean_f1_rescaled: float
    per_utterance: list[UtteranceScore]
    uncovered: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "baseline_b": self.baseline_b,
            "pooled_wer": self.pooled_wer,
            "mean_f1_rescaled": self.mean_f1_rescaled,
            "per_utterance": [r.to_dict() for r in self.per_utterance],
            "uncovered": list(self.uncovered),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConditionResult":
        return cls(
            condition=d["condition"],
            baseline_b=float(d["baseline_b"]),
            pooled_wer=float(d["pooled_wer"]),
            mean_f1_rescaled=float(d["mean_f1_rescaled"]),
            per_utterance=[UtteranceScore.from_dict(r) for r in d["per_utterance"]],
            uncovered=list(d.get("uncovered", [])),
        )


def _pool(rows: list[UtteranceScore]) -> float:
    errors = sum(r.S + r.D + r.I for r in rows)
    denom = sum(r.S + r.D + r.C for r in rows)
    if denom == 0:
        raise EmptyReferenceError("pooled word error rate over zero reference tokens")
    return errors / denom


def evaluate_run(
    refs: dict[str, str],
    hyps: dict[str, str],
    embed_fn,
    baseline_b: float = 0.0,
    condition: str = "run",
    allow_partial: bool = False,
) -> ConditionResult:
    """Score hypotheses against references by shared utterance id.

    embed_fn(utterance_id, role, tokens) -> vector list, role in {"ref","hyp"}.
    Hypothesis ids must be a subset of reference ids; references without a
    hypothesis fail the run unless allow_partial, in which case they are
    recorded in `uncovered`. A hypothesis that normalizes to nothing scores
    all-deletions WER and an embedding F1 of 0 before rescaling.
    """
    if not refs:
        raise ToolkitError("no references to evaluate")
    unknown = sorted(set(hyps) - set(refs))
    if unknown:
        raise ToolkitError(f"hypotheses for unknown utterance ids: {unknown[:10]}")
    uncovered = sorted(set(refs) - set(hyps))
    if uncovered and not allow_partial:
        raise ToolkitError(
            f"{len(uncovered)} reference(s) lack a hypothesis, e.g. {uncovered[:5]}; "
            "pass allow_partial to score the covered subset"
        )

    rows: list[UtteranceScore] = []
    for uid in refs:
        if uid not in hyps:
            continue
        ref_tokens = list(normalize(refs[uid]).tokens)
        if not ref_tokens:
            raise EmptyReferenceError(f"reference for {uid} normalized to zero tokens")
        hyp_tokens = list(normalize(hyps[uid]).tokens)
        breakdown = wer(align(ref_tokens, hyp_tokens))
        if hyp_tokens:
            score = bertscore(
                embed_fn(uid, "hyp", hyp_tokens),
                embed_fn(uid, "ref", ref_tokens),
                baseline_b,
            )
            f1_rescaled = score.f1_rescaled
        else:
            # silent model output: treat as completely dissimilar
            f1_rescaled = (0.0 - baseline_b) / (1.0 - baseline_b)
        rows.append(
            UtteranceScore(
                utterance_id=uid,
                wer=breakdown.wer,
                f1_rescaled=f1_rescaled,
                S=breakdown.S,
                D=breakdown.D,
                I=breakdown.I,
                C=breakdown.C,
            )
        )
    return ConditionResult(
        condition=condition,
        baseline_b=baseline_b,
        pooled_wer=_pool(rows),
        mean_f1_rescaled=sum(r.f1_rescaled for r in rows) / len(rows),
        per_utterance=rows,
        uncovered=uncovered,
    )


def table_embedder(table):
    """Adapt an EmbeddingTable to evaluate_run's embed_fn; keys follow the
    <utterance_id>::<role> convention used by the mock embedding writer."""

    def embed_fn(uid: str, role: str, tokens: list[str]):
        return table.tokens_for(f"{uid}::{role}", len(tokens))

    return embed_fn


def sidecar_embedder(endpoint: str, model_id: str = "mock", cache_dir=None):
    from .metrics import embed_via_sidecar

    def embed_fn(uid: str, role: str, tokens: list[str]):
        return embed_via_sidecar(tokens, endpoint, model_id=model_id, cache_dir=cache_dir)

    return embed_fn


@dataclass(frozen=True)
class BiasReport:
    """Deltas are disfluent minus non-disfluent. For an error metric (wer) a
    positive delta reads "worse on disfluent speech"; for a similarity metric
    (f1) the sign flips, so a gap shows up as a negative delta_f1."""

    wer_fb: float
    wer_fbn: float
    delta_wer: float
    f1_fb: float
    f1_fbn: float
    delta_f1: float

    def to_dict(self) -> dict:
        return {
            "wer_fb": self.wer_fb,
            "wer_fbn": self.wer_fbn,
            "delta_wer": self.delta_wer,
            "f1_fb": self.f1_fb,
            "f1_fbn": self.f1_fbn,
            "delta_f1": self.delta_f1,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BiasReport":
        return cls(**{k: float(d[k]) for k in (
            "wer_fb", "wer_fbn", "delta_wer", "f1_fb", "f1_fbn", "delta_f1"
        )})


def bias_report(fb: ConditionResult, fbn: ConditionResult) -> BiasReport:
    """fb: the disfluent condition; fbn: the non-disfluent one."""
    if fb.baseline_b != fbn.baseline_b:
        raise ToolkitError(
            f"conditions were scored with different baselines ({fb.baseline_b} vs {fbn.baseline_b})"
        )
    return BiasReport(
        wer_fb=fb.pooled_wer,
        wer_fbn=fbn.pooled_wer,
        delta_wer=fb.pooled_wer - fbn.pooled_wer,
        f1_fb=fb.mean_f1_rescaled,
        f1_fbn=fbn.mean_f1_rescaled,
        delta_f1=fb.mean_f1_rescaled - fbn.mean_f1_rescaled,
    )


def _corpus_index(result: ConditionResult, corpus: Corpus) -> dict:
    by_id = {u.id: u for u in corpus.utterances}
    missing = sorted(r.utterance_id for r in result.per_utterance if r.utterance_id not in by_id)
    if missing:
        raise ToolkitError(f"scored utterances missing from the corpus: {missing[:10]}")
    return by_id


def per_video_type(result: ConditionResult, corpus: Corpus) -> tuple[list[dict], list[str]]:
    """Pooled WER per recording setting; settings with no scored utterances
    are omitted and noted."""
    by_id = _corpus_index(result, corpus)
    groups: dict[str, list[UtteranceScore]] = {}
    for r in result.per_utterance:
        groups.setdefault(by_id[r.utterance_id].setting.value, []).append(r)
    rows = [
        {"setting": s, "n_utterances": len(g), "pooled_wer": _pool(g)}
        for s, g in sorted(groups.items())
    ]
    notes = [
        f"setting {s.value!r} has no scored utterances"
        for s in sorted({u.setting for u in corpus.utterances}, key=lambda s: s.value)
        if s.value not in groups
    ]
    return rows, notes


def speaker_label(speaker_id: str, corpus: Corpus) -> str:
    """Age plus gender initial ("26f") when demographics are known."""
    info = corpus.speakers.get(speaker_id)
    if info and info.age is not None and info.gender:
        return f"{info.age}{info.gender[0].lower()}"
    return speaker_id


def per_speaker(result: ConditionResult, corpus: Corpus) -> list[dict]:
    by_id = _corpus_index(result, corpus)
    groups: dict[str, list[UtteranceScore]] = {}
    for r in result.per_utterance:
        groups.setdefault(by_id[r.utterance_id].speaker_id, []).append(r)
    rows = []
    for sid, g in sorted(groups.items()):
        info = corpus.speakers.get(sid)
        rows.append(
            {
                "speaker_id": sid,
                "label": speaker_label(sid, corpus),
                "age": info.age if info else None,
                "gender": info.gender if info else "",
                "n_utterances": len(g),
                "pooled_wer": _pool(g),
            }
        )
    return rows


def _quartiles(values: list[float]) -> dict:
    """Linear-interpolation quartiles (the numpy default method)."""
    xs = sorted(values)
    if not xs:
        raise ToolkitError("quartiles of an empty list")

    def q(p: float) -> float:
        pos = p * (len(xs) - 1)
        lo = int(pos)
        hi = min(lo + 1, len(xs) - 1)
        frac = pos - lo
        return xs[lo] * (1 - frac) + xs[hi] * frac

    return {"q1": q(0.25), "median": q(0.5), "q3": q(0.75)}


# Word and phrase repetitions report as one category; everything else by kind.
_KIND_CATEGORY = {
    DisfluencyKind.WORD_REPETITION: "repetition",
    DisfluencyKind.PHRASE_REPETITION: "repetition",
    DisfluencyKind.INTERJECTION: "interjection",
    DisfluencyKind.RETRACING: "retracing",
    DisfluencyKind.FRAGMENT: "fragment",
    DisfluencyKind.PAUSE: "pause",
    DisfluencyKind.OTHER: "other",
}


def per_disfluency_type(result: ConditionResult, corpus: Corpus) -> list[dict]:
    """WER distribution per disfluency category; an utterance counts toward
    every category it contains, so rows overlap by design."""
    by_id = _corpus_index(result, corpus)
    groups: dict[str, list[float]] = {}
    for r in result.per_utterance:
        cats = {_KIND_CATEGORY[k] for k in classify_disfluencies(by_id[r.utterance_id])}
        for cat in cats:
            groups.setdefault(cat, []).append(r.wer)
    rows = []
    for cat, wers in sorted(groups.items()):
        rows.append(
            {
                "kind": cat,
                "n_utterances": len(wers),
                "wers": sorted(wers),
                **_quartiles(wers),
            }
        )
    return rows


@dataclass
class Report:
    conditions: list[ConditionResult]
    bias: BiasReport | None = None
    breakdowns: dict = field(default_factory=dict)  # condition -> section -> rows

    def to_dict(self) -> dict:
        return {
            "conditions": [c.to_dict() for c in self.conditions],
            "bias": self.bias.to_dict() if self.bias else None,
            "breakdowns": self.breakdowns,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(
            conditions=[ConditionResult.from_dict(c) for c in d["conditions"]],
            bias=BiasReport.from_dict(d["bias"]) if d.get("bias") else None,
            breakdowns=d.get("breakdowns", {}),
        )


def build_breakdowns(result: ConditionResult, corpus: Corpus) -> dict:
    settings, notes = per_video_type(result, corpus)
    return {
        "settings": settings,
        "setting_notes": notes,
        "speakers": per_speaker(result, corpus),
        "disfluency_kinds": [
            {k: v for k, v in row.items() if k != "wers"}
            for row in per_disfluency_type(result, corpus)
        ],
    }


def _fmt4(v: float) -> str:
    s = f"{v:.4f}"
    if s.startswith("0."):
        return s[1:]
    if s.startswith("-0."):
        return "-" + s[2:]
    return s


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2) + "\n"
    if fmt == "md":
        return _render_markdown(report)
    if fmt == "csv":
        return _render_csv(report)
    raise ToolkitError(f"unknown report format {fmt!r} (expected md, csv, or json)")


def _render_markdown(report: Report) -> str:
    lines = ["# evaluation report", ""]
    lines += ["| condition | wer | f1_rescaled |", "| --- | --- | --- |"]
    for c in report.conditions:
        lines.append(f"| {c.condition} | {_fmt4(c.pooled_wer)} | {_fmt4(c.mean_f1_rescaled)} |")
    lines.append("")
    if report.bias:
        b = report.bias
        lines += [
            "## accuracy bias (disfluent minus non-disfluent)",
            "",
            "| metric | disfluent | non-disfluent | delta |",
            "| --- | --- | --- | --- |",
            f"| wer | {_fmt4(b.wer_fb)} | {_fmt4(b.wer_fbn)} | {_fmt4(b.delta_wer)} |",
            f"| f1_rescaled | {_fmt4(b.f1_fb)} | {_fmt4(b.f1_fbn)} | {_fmt4(b.delta_f1)} |",
            "",
        ]
    for condition, sections in report.breakdowns.items():
        if sections.get("settings"):
            lines += [f"## {condition}: by setting", "", "| setting | n | wer |", "| --- | --- | --- |"]
            lines += [
                f"| {r['setting']} | {r['n_utterances']} | {_fmt4(r['pooled_wer'])} |"
                for r in sections["settings"]
            ]
            lines += [f"_{note}_" for note in sections.get("setting_notes", [])]
            lines.append("")
        if sections.get("speakers"):
            lines += [f"## {condition}: by speaker", "", "| speaker | n | wer |", "| --- | --- | --- |"]
            lines += [
                f"| {r['label']} | {r['n_utterances']} | {_fmt4(r['pooled_wer'])} |"
                for r in sections["speakers"]
            ]
            lines.append("")
        if sections.get("disfluency_kinds"):
            lines += [
                f"## {condition}: by disfluency kind",
                "",
                "| kind | n | q1 | median | q3 |",
                "| --- | --- | --- | --- | --- |",
            ]
            lines += [
                f"| {r['kind']} | {r['n_utterances']} | {_fmt4(r['q1'])} | "
                f"{_fmt4(r['median'])} | {_fmt4(r['q3'])} |"
                for r in sections["disfluency_kinds"]
            ]
            lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def _render_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "condition", "row", "metric", "value"])
    for c in report.conditions:
        w.writerow(["conditions", c.condition, "", "wer", f"{c.pooled_wer:.4f}"])
        w.writerow(["conditions", c.condition, "", "f1_rescaled", f"{c.mean_f1_rescaled:.4f}"])
    if report.bias:
        for metric, value in report.bias.to_dict().items():
            w.writerow(["bias", "", "", metric, f"{value:.4f}"])
    for condition, sections in report.breakdowns.items():
        for r in sections.get("settings", []):
            w.writerow(["setting", condition, r["setting"], "wer", f"{r['pooled_wer']:.4f}"])
        for r in sections.get("speakers", []):
            w.writerow(["speaker", condition, r["label"], "wer", f"{r['pooled_wer']:.4f}"])
        for r in sections.get("disfluency_kinds", []):
            for metric in ("q1", "median", "q3"):
                w.writerow(["disfluency", condition, r["kind"], metric, f"{r[metric]:.4f}"])
    return buf.getvalue()


def save_condition_result(result: ConditionResult, path: str | Path) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_condition_result(path: str | Path) -> ConditionResult:
    try:
        return ConditionResult.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (KeyError, ValueError, TypeError) as e:
        raise ToolkitError(f"{path}: not a condition result file: {e}") from e


def parse_report(doc: str) -> Report:
    return Report.from_dict(json.loads(doc))
