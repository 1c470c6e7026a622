"""Single entry point exposing the pipeline as subcommands.

Exit codes: 0 success, 1 validation or input error, 2 partial failure (some
jobs failed but the run completed). Logs go to stderr; the last stdout line of
every command is a JSON summary, so scripts can consume results without
scraping. Flags override config-file values; endpoints fall back to the
DISFLUENCY_SIDECAR_URL environment variable.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .augmentor import (
    AUGMENTABLE_KINDS,
    augment_corpus,
    compute_p,
    load_augmented_rows,
    save_augmented,
)
from .chat_corpus import (
    Corpus,
    Setting,
    SourceMeta,
    SpeakerInfo,
    corpus_stats,
    derive_fluent_text,
    load_corpus,
    merge_corpora,
    parse_chat,
    save_corpus,
)
from .config import RunConfig, load_config, resolve_profile
from .errors import FluentEmptyError, ToolkitError
from .folds import assign_folds, load_fold_file, save_fold_file, training_pool
from .metrics import load_embeddings
from .mock_embeddings import MOCK_DIM, MOCK_MODEL_ID, write_mock_embedding_file
from .report import (
    Report,
    bias_report,
    build_breakdowns,
    evaluate_run,
    load_condition_result,
    render,
    save_condition_result,
    sidecar_embedder,
    table_embedder,
)
from .synth_jobs import (
    DEFAULT_FLUENT_VOICES,
    DEFAULT_MOCK_VOICES,
    JobStatus,
    RetryPolicy,
    VoiceSpec,
    build_fluent_manifest,
    build_manifest,
    execute_manifest,
    load_manifest,
    save_execution_report,
    save_manifest,
)

log = logging.getLogger("dfkit")

ENV_SIDECAR_URL = "DISFLUENCY_SIDECAR_URL"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for partial failure
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with path.open("r", encoding="utf-8") as f:
        for i, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ToolkitError(f"{path}:{i}: invalid JSON: {e}") from e
    return rows


def _load_texts(path: str, ref_field: str = "verbatim") -> dict[str, str]:
    """Utterance texts from a corpus file, a TTS manifest, or a generic
    {utterance_id, text} JSONL, distinguished by their row fields."""
    p = Path(path)
    rows = _read_jsonl(p)
    if not rows:
        raise ToolkitError(f"{path}: no rows")
    first = rows[0]
    texts: dict[str, str] = {}
    if "verbatim_tokens" in first:
        corpus = load_corpus(p)
        skipped = 0
        for u in corpus.utterances:
            if ref_field == "verbatim":
                texts[u.id] = " ".join(u.verbatim_tokens)
            else:
                try:
                    texts[u.id] = " ".join(derive_fluent_text(u))
                except FluentEmptyError:
                    skipped += 1
        if skipped:
            log.warning("%d utterance(s) have no fluent rendition and were skipped", skipped)
        return texts
    id_key = "job_id" if "job_id" in first else "utterance_id"
    for i, row in enumerate(rows, 1):
        if id_key not in row or "text" not in row:
            raise ToolkitError(f"{path}:{i}: row needs {id_key!r} and 'text'")
        uid = row[id_key]
        if uid in texts:
            raise ToolkitError(f"{path}: duplicate utterance id {uid!r}")
        texts[uid] = row["text"]
    return texts


def _resolve_voices(args, cfg: RunConfig, default) -> list[VoiceSpec]:
    if args.voices is not None:
        data = json.loads(Path(args.voices).read_text(encoding="utf-8"))
        if not isinstance(data, list) or not data:
            raise ToolkitError(f"{args.voices}: voices file must be a non-empty JSON list")
        return [VoiceSpec.from_dict(d) for d in data]
    if cfg.tts.voices:
        return [VoiceSpec.from_dict(d) for d in cfg.tts.voices]
    return list(default)


def _parse_weights(spec: str | None, from_config: dict | None) -> dict | None:
    if spec is None:
        if from_config is None:
            return None
        valid = {k.value: k for k in AUGMENTABLE_KINDS}
        out = {}
        for name, w in from_config.items():
            if name not in valid:
                raise ToolkitError(f"unknown event type in type_weights: {name!r}")
            out[valid[name]] = float(w)
        return out
    out = {}
    valid = {k.value: k for k in AUGMENTABLE_KINDS}
    for part in spec.split(","):
        name, _, value = part.partition("=")
        name = name.strip()
        if name not in valid:
            raise ToolkitError(
                f"unknown event type {name!r} in --weights (expected {sorted(valid)})"
            )
        try:
            out[valid[name]] = float(value)
        except ValueError as e:
            raise ToolkitError(f"bad weight for {name!r}: {value!r}") from e
    return out


def _config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return RunConfig()


def _pick(flag_value, config_value, default=None):
    if flag_value is not None:
        return flag_value
    if config_value is not None:
        return config_value
    return default


def _endpoint(args, cfg: RunConfig) -> str:
    ep = _pick(args.endpoint, cfg.tts.endpoint, os.environ.get(ENV_SIDECAR_URL))
    if not ep:
        raise ToolkitError(
            f"no service endpoint: pass --endpoint, set tts.endpoint in the config, "
            f"or export {ENV_SIDECAR_URL}"
        )
    return ep


def _infer_setting(path: Path) -> Setting:
    stem = path.stem.lower()
    if "read" in stem:
        return Setting.READING
    if "interview" in stem:
        return Setting.INTERVIEW
    if "synth" in stem:
        return Setting.SYNTHETIC
    raise ToolkitError(
        f"cannot infer the recording setting from {path.name!r}; pass --setting explicitly"
    )


# ---------------------------------------------------------------- subcommands


def _cmd_parse(args) -> dict:
    speaker_map = {}
    if args.speaker_map:
        speaker_map = json.loads(Path(args.speaker_map).read_text(encoding="utf-8"))
    parts, all_warnings = [], []
    for file_path in args.files:
        p = Path(file_path)
        setting = _infer_setting(p) if args.setting == "auto" else Setting(args.setting)
        meta = SourceMeta(
            video_id=p.stem, setting=setting, speaker_map=speaker_map.get(p.stem)
        )
        corpus_part, warnings = parse_chat(p.read_text(encoding="utf-8"), meta)
        parts.append(corpus_part)
        all_warnings.extend(f"{p.name}: {w}" for w in warnings)
    corpus = merge_corpora(parts)
    if args.speakers:
        extra = json.loads(Path(args.speakers).read_text(encoding="utf-8"))
        speakers = dict(corpus.speakers)
        for sid, d in extra.items():
            speakers[sid] = SpeakerInfo(age=d.get("age"), gender=d.get("gender", ""))
        for sid in {u.speaker_id for u in corpus.utterances}:
            if sid not in speakers:
                all_warnings.append(f"no demographics for speaker {sid}, filled with blanks")
                speakers[sid] = SpeakerInfo()
        corpus = Corpus(utterances=corpus.utterances, speakers=speakers)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out)
    warnings_path = out.with_suffix(".warnings.txt")
    if all_warnings:
        warnings_path.write_text("\n".join(all_warnings) + "\n", encoding="utf-8")
    elif warnings_path.exists():
        warnings_path.unlink()
    return {
        "command": "parse",
        "status": "ok",
        "utterances": len(corpus.utterances),
        "speakers": len(corpus.speaker_ids()),
        "warnings": len(all_warnings),
        "out": str(out),
    }


def _cmd_stats(args) -> dict:
    stats = corpus_stats(load_corpus(args.corpus))
    return {"command": "stats", "status": "ok", **stats}


def _cmd_split(args) -> dict:
    cfg = _config(args)
    corpus = load_corpus(args.corpus)
    k = _pick(args.k, None, cfg.folds.k)
    spf = _pick(args.speakers_per_fold, None, cfg.folds.speakers_per_fold)
    seed = _pick(args.seed, None, cfg.seed)
    fa = assign_folds(corpus, k=k, speakers_per_fold=spf, seed=seed)
    save_fold_file(fa, args.out)
    return {
        "command": "split",
        "status": "ok",
        "seed": seed,
        "substream": "split",
        "k": k,
        "speakers_per_fold": spf,
        "out": str(args.out),
    }


def _cmd_augment(args) -> dict:
    cfg = _config(args)
    corpus = load_corpus(args.corpus)
    pool_corpus = corpus
    if args.fold_file is not None:
        if args.test_fold is None:
            raise ToolkitError("--fold-file needs --test-fold")
        fa = load_fold_file(args.fold_file)
        pool_corpus = Corpus(
            utterances=training_pool(corpus, fa, args.test_fold), speakers=corpus.speakers
        )
    elif args.test_fold is not None:
        raise ToolkitError("--test-fold needs --fold-file")

    n = _pick(args.n, cfg.augment.n if cfg.augment.n else None)
    if n is None:
        raise ToolkitError("pass --n or set augment.n in the config")
    profile = resolve_profile(_pick(args.profile, cfg.augment.profile, "standard"))
    seed = _pick(args.seed, None, cfg.seed)
    weights = _parse_weights(args.weights, cfg.augment.type_weights)
    items = augment_corpus(pool_corpus, n, profile, type_weights=weights, seed=seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_augmented(items, out)
    return {
        "command": "augment",
        "status": "ok",
        "seed": seed,
        "substream": "augment",
        "n": n,
        "p": compute_p(n, len(corpus.utterances)),
        "profile": profile.name,
        "pool_size": len(pool_corpus.utterances),
        "out": str(out),
    }


def _sniff_jobs_input(path: str, forced: str | None) -> str:
    if forced:
        return forced
    rows = _read_jsonl(Path(path))
    if not rows:
        raise ToolkitError(f"{path}: no rows")
    if "job_id" in rows[0]:
        return "manifest"
    if "source_utterance_id" in rows[0]:
        return "augmented"
    raise ToolkitError(f"{path}: neither a manifest nor an augmentation file")


def _execute(manifest, args, cfg) -> dict:
    endpoint = _endpoint(args, cfg)
    out_dir = Path(_pick(args.out_dir, None, cfg.paths.out_dir))
    retry = RetryPolicy(
        attempts=_pick(args.retry_attempts, None, cfg.tts.retry_attempts),
        backoff_s=_pick(args.retry_backoff, None, cfg.tts.retry_backoff_s),
    )
    results = execute_manifest(
        manifest,
        endpoint,
        out_dir,
        concurrency=_pick(args.concurrency, None, cfg.tts.concurrency),
        retry=retry,
    )
    report_path = Path(args.report) if args.report else out_dir / "execution_report.jsonl"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    save_execution_report(results, report_path)
    counts = {s.value: sum(1 for r in results if r.status == s) for s in JobStatus}
    failed = counts[JobStatus.FAILED.value]
    return {
        "status": "partial" if failed else "ok",
        "jobs": len(results),
        **counts,
        "out_dir": str(out_dir),
        "report": str(report_path),
        "_exit_code": 2 if failed else 0,
    }


def _cmd_synth(args) -> dict:
    cfg = _config(args)
    kind = _sniff_jobs_input(args.input, args.input_kind)
    seed = _pick(args.seed, None, cfg.seed)
    if kind == "manifest":
        manifest = load_manifest(args.input)
    else:
        voices = _resolve_voices(args, cfg, DEFAULT_MOCK_VOICES)
        manifest = build_manifest(
            load_augmented_rows(args.input), voices, seed=seed, created_from=str(args.input)
        )
    if args.manifest_out:
        save_manifest(manifest, args.manifest_out)
    summary = {
        "command": "synth",
        "seed": manifest.seed,
        "substream": "voice",
        "jobs": len(manifest.jobs),
    }
    if args.manifest_out:
        summary["manifest_out"] = str(args.manifest_out)
    if args.build_only:
        if not args.manifest_out:
            raise ToolkitError("--build-only needs --manifest-out")
        return {**summary, "status": "ok"}
    return {**summary, **_execute(manifest, args, cfg)}


def _cmd_synth_fluent(args) -> dict:
    cfg = _config(args)
    corpus = load_corpus(args.corpus)
    seed = _pick(args.seed, None, cfg.seed)
    voices = _resolve_voices(args, cfg, DEFAULT_FLUENT_VOICES)
    manifest = build_fluent_manifest(corpus, voices, seed=seed, created_from=str(args.corpus))
    if args.manifest_out:
        save_manifest(manifest, args.manifest_out)
    summary = {
        "command": "synth-fluent",
        "seed": seed,
        "substream": "voice",
        "jobs": len(manifest.jobs),
        "skipped_empty": len(corpus.utterances) - len(manifest.jobs),
    }
    if args.manifest_out:
        summary["manifest_out"] = str(args.manifest_out)
    if args.build_only:
        if not args.manifest_out:
            raise ToolkitError("--build-only needs --manifest-out")
        return {**summary, "status": "ok"}
    return {**summary, **_execute(manifest, args, cfg)}


def _cmd_eval(args) -> dict:
    cfg = _config(args)
    refs = _load_texts(args.refs, ref_field=args.ref_field)
    hyps = _load_texts(args.hyps)
    source = _pick(args.emb, cfg.embeddings.source, os.environ.get(ENV_SIDECAR_URL))
    if not source:
        raise ToolkitError(
            f"no embedding source: pass --emb (file or URL), set embeddings.source "
            f"in the config, or export {ENV_SIDECAR_URL}"
        )
    model_id = _pick(args.model, None, cfg.embeddings.model)
    if source.startswith(("http://", "https://")):
        embed_fn = sidecar_embedder(
            source, model_id=model_id, cache_dir=_pick(args.cache_dir, cfg.embeddings.cache_dir)
        )
    else:
        embed_fn = table_embedder(load_embeddings(source))
    baseline_b = _pick(args.b, None, cfg.scoring.baseline_b)
    result = evaluate_run(
        refs,
        hyps,
        embed_fn,
        baseline_b=baseline_b,
        condition=args.condition,
        allow_partial=args.allow_partial,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_condition_result(result, out)
    return {
        "command": "eval",
        "status": "ok",
        "condition": result.condition,
        "n_scored": len(result.per_utterance),
        "n_uncovered": len(result.uncovered),
        "pooled_wer": result.pooled_wer,
        "mean_f1_rescaled": result.mean_f1_rescaled,
        "baseline_b": baseline_b,
        "out": str(out),
    }


def _cmd_bias(args) -> dict:
    fb = load_condition_result(args.fb)
    fbn = load_condition_result(args.fbn)
    b = bias_report(fb, fbn)
    if args.out:
        Path(args.out).write_text(json.dumps(b.to_dict(), indent=2) + "\n", encoding="utf-8")
    return {
        "command": "bias",
        "status": "ok",
        **b.to_dict(),
        **({"out": str(args.out)} if args.out else {}),
    }


def _cmd_report(args) -> dict:
    from .report import BiasReport

    conditions = [load_condition_result(p) for p in args.inputs]
    bias = None
    if args.bias:
        bias = BiasReport.from_dict(json.loads(Path(args.bias).read_text(encoding="utf-8")))
    breakdowns = {}
    if args.corpus:
        corpus = load_corpus(args.corpus)
        for c in conditions:
            breakdowns[c.condition] = build_breakdowns(c, corpus)
    report = Report(conditions=conditions, bias=bias, breakdowns=breakdowns)
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    if not formats:
        raise ToolkitError("--format must name at least one of md, csv, json")
    written = []
    for fmt in formats:
        doc = render(report, fmt)
        out = Path(f"{args.out_prefix}.{fmt}")
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(doc, encoding="utf-8")
        written.append(str(out))
    return {"command": "report", "status": "ok", "written": written}


def _cmd_mock_embed(args) -> dict:
    refs = _load_texts(args.refs, ref_field=args.ref_field)
    hyps = _load_texts(args.hyps)
    n = write_mock_embedding_file(refs, hyps, args.out, dim=args.dim, model_id=MOCK_MODEL_ID)
    return {
        "command": "mock-embed",
        "status": "ok",
        "vectors": n,
        "dim": args.dim,
        "model": MOCK_MODEL_ID,
        "out": str(args.out),
    }


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dfkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="YAML run config; flags override its values")
        return p

    p = add("parse", _cmd_parse, "parse CHAT transcripts into a corpus JSONL")
    p.add_argument("files", nargs="+", help="transcript files (.cha)")
    p.add_argument(
        "--setting",
        default="auto",
        choices=["auto", "reading", "interview", "synthetic"],
        help="recording setting for all files; auto infers from filenames",
    )
    p.add_argument("--out", required=True, help="corpus JSONL output path")
    p.add_argument("--speakers", help="JSON {speaker_id: {age, gender}} demographics")
    p.add_argument("--speaker-map", help="JSON {video_id: {tier_code: speaker_id}}")

    p = add("stats", _cmd_stats, "descriptive statistics for a corpus")
    p.add_argument("corpus", help="corpus JSONL")

    p = add("split", _cmd_split, "assign speakers to cross-validation folds")
    p.add_argument("corpus", help="corpus JSONL")
    p.add_argument("--k", type=int, help="number of folds")
    p.add_argument("--speakers-per-fold", type=int, help="speakers in each fold")
    p.add_argument("--seed", type=int, help="top-level seed")
    p.add_argument("--out", required=True, help="fold file (JSON) output path")

    p = add("augment", _cmd_augment, "generate synthetic disfluent utterances")
    p.add_argument("corpus", help="corpus JSONL")
    p.add_argument("--n", type=int, help="number of augmented utterances")
    p.add_argument("--profile", help="standard or extended")
    p.add_argument("--fold-file", help="restrict sources to a training pool")
    p.add_argument("--test-fold", type=int, help="held-out fold index")
    p.add_argument("--weights", help="event type weights, e.g. word_repetition=1,interjection=2")
    p.add_argument("--seed", type=int, help="top-level seed")
    p.add_argument("--out", required=True, help="augmented JSONL output path")

    def add_synth_flags(p):
        p.add_argument("--endpoint", help=f"TTS service URL (or ${ENV_SIDECAR_URL})")
        p.add_argument("--out-dir", help="directory for synthesized audio")
        p.add_argument("--concurrency", type=int, help="parallel requests")
        p.add_argument("--retry-attempts", type=int, help="attempts per job")
        p.add_argument("--retry-backoff", type=float, help="initial backoff seconds")
        p.add_argument("--voices", help="JSON list of {provider, voice_id}")
        p.add_argument("--seed", type=int, help="top-level seed (voice assignment)")
        p.add_argument("--build-only", action="store_true", help="write the manifest and stop")
        p.add_argument("--manifest-out", help="where to write the built manifest")
        p.add_argument("--report", help="execution report JSONL path")

    p = add("synth", _cmd_synth, "synthesize audio for a manifest or augmentation file")
    p.add_argument("input", help="manifest JSONL or augmented JSONL")
    p.add_argument("--input-kind", choices=["manifest", "augmented"], help="skip sniffing")
    add_synth_flags(p)

    p = add("synth-fluent", _cmd_synth_fluent, "synthesize fluent renditions of a corpus")
    p.add_argument("corpus", help="corpus JSONL")
    add_synth_flags(p)

    p = add("eval", _cmd_eval, "score hypotheses against references")
    p.add_argument("--refs", required=True, help="corpus/manifest/{utterance_id,text} JSONL")
    p.add_argument(
        "--ref-field",
        default="verbatim",
        choices=["verbatim", "fluent"],
        help="reference rendition when --refs is a corpus",
    )
    p.add_argument("--hyps", required=True, help="hypotheses JSONL {utterance_id, text}")
    p.add_argument("--emb", help=f"embedding file or service URL (or ${ENV_SIDECAR_URL})")
    p.add_argument("--model", help="embedding model id for service lookups")
    p.add_argument("--cache-dir", help="embedding cache directory")
    p.add_argument("--b", type=float, help="rescaling baseline (must be < 1)")
    p.add_argument("--condition", default="run", help="label for this scoring run")
    p.add_argument("--allow-partial", action="store_true", help="score covered refs only")
    p.add_argument("--out", default="result.json", help="condition result output path")

    p = add("bias", _cmd_bias, "disfluent minus non-disfluent deltas")
    p.add_argument("--fb", required=True, help="condition result for disfluent speech")
    p.add_argument("--fbn", required=True, help="condition result for non-disfluent speech")
    p.add_argument("--out", help="bias report JSON output path")

    p = add("report", _cmd_report, "render condition results as md/csv/json")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="condition result files")
    p.add_argument("--bias", help="bias report JSON to include")
    p.add_argument("--corpus", help="corpus JSONL enabling per-setting/speaker/kind breakdowns")
    p.add_argument("--format", default="md,csv,json", help="comma list of md,csv,json")
    p.add_argument("--out-prefix", default="report", help="output path prefix")

    p = add("mock-embed", _cmd_mock_embed, "write deterministic embeddings for offline eval")
    p.add_argument("--refs", required=True, help="reference texts (corpus/manifest/generic JSONL)")
    p.add_argument("--ref-field", default="verbatim", choices=["verbatim", "fluent"])
    p.add_argument("--hyps", required=True, help="hypotheses JSONL")
    p.add_argument("--dim", type=int, default=MOCK_DIM)
    p.add_argument("--out", required=True, help="embedding file output path")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(asctime)s %(name)s %(message)s"
    )
    try:
        summary = args.func(args)
    except (ToolkitError, ValueError, OSError) as e:
        log.error("%s", e)
        print(json.dumps({"command": args.command, "status": "error", "error": str(e)}))
        return 1
    code = int(summary.pop("_exit_code", 0))
    print(json.dumps(summary))
    return code


if __name__ == "__main__":
    sys.exit(main())
