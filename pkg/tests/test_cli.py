"""End-to-end command-line flows on the committed fixtures.

Each command prints a JSON summary as its last stdout line; these tests drive
cli.main directly and assert on exit codes, summaries, and the files written.
"""

import json
import logging
from pathlib import Path

import pytest

from conftest import FIXTURES, load_fixture_corpus
from disfluency_kit.chat_corpus import derive_fluent_text, load_corpus
from disfluency_kit.cli import ENV_SIDECAR_URL, main
from disfluency_kit.errors import FluentEmptyError
from disfluency_kit.folds import load_fold_file
from disfluency_kit.synth_jobs import load_manifest


def run(capsys, argv):
    # rebind the log handler to the stream capsys is currently capturing
    logging.getLogger().handlers.clear()
    code = main(argv)
    out = capsys.readouterr().out.strip()
    summary = json.loads(out.splitlines()[-1]) if out else None
    return code, summary


def cha_files():
    return [str(p) for p in sorted(FIXTURES.glob("*.cha"))]


@pytest.fixture
def corpus_file(tmp_path, capsys):
    out = tmp_path / "corpus.jsonl"
    code, _ = run(capsys, ["parse", *cha_files(), "--out", str(out)])
    assert code == 0
    return out


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


# -------------------------------------------------------------------- basics


def test_version(capsys):
    assert main(["--version"]) == 0
    assert "dfkit" in capsys.readouterr().out


def test_usage_error_exits_one_not_two(capsys):
    code, summary = run(capsys, ["augment"])  # missing positional and --out
    assert code == 1 and summary is None
    assert main(["no-such-command"]) == 1


def test_missing_input_file(capsys, tmp_path):
    code, summary = run(capsys, ["stats", str(tmp_path / "nope.jsonl")])
    assert code == 1
    assert summary["status"] == "error"


# --------------------------------------------------------------------- parse


def test_parse_fixtures(capsys, tmp_path):
    out = tmp_path / "corpus.jsonl"
    code, summary = run(capsys, ["parse", *cha_files(), "--out", str(out)])
    assert code == 0
    assert summary == {
        "command": "parse",
        "status": "ok",
        "utterances": 23,
        "speakers": 12,
        "warnings": 4,
        "out": str(out),
    }
    corpus = load_corpus(out)
    assert len(corpus.utterances) == 23
    assert corpus.speakers["interview-01-PAR"].age == 26
    warnings = (tmp_path / "corpus.warnings.txt").read_text().splitlines()
    assert len(warnings) == 4
    assert sorted(w.split(":")[0] for w in warnings) == [
        "interview-02.cha",
        "interview-03.cha",
        "reading-03.cha",
        "reading-03.cha",
    ]


def test_parse_setting_inference_failure(capsys, tmp_path):
    mystery = tmp_path / "mystery.cha"
    mystery.write_text((FIXTURES / "reading-01.cha").read_text(), encoding="utf-8")
    code, summary = run(capsys, ["parse", str(mystery), "--out", str(tmp_path / "c.jsonl")])
    assert code == 1
    assert "cannot infer the recording setting" in summary["error"]

    code, summary = run(
        capsys,
        ["parse", str(mystery), "--setting", "interview", "--out", str(tmp_path / "c.jsonl")],
    )
    assert code == 0
    assert summary["utterances"] == 4
    assert all(u.setting.value == "interview" for u in load_corpus(tmp_path / "c.jsonl").utterances)


def test_parse_speakers_blank_fill(capsys, tmp_path):
    doc = "@Begin\n*ABC:\thello there .\n*DEF:\tgood morning .\n@End\n"
    src = tmp_path / "micro-interview.cha"
    src.write_text(doc, encoding="utf-8")
    speakers = tmp_path / "speakers.json"
    speakers.write_text(json.dumps({"micro-interview-ABC": {"age": 30, "gender": "female"}}))
    out = tmp_path / "micro.jsonl"
    code, summary = run(capsys, ["parse", str(src), "--speakers", str(speakers), "--out", str(out)])
    assert code == 0
    corpus = load_corpus(out)
    assert corpus.speakers["micro-interview-ABC"].age == 30
    assert corpus.speakers["micro-interview-DEF"].age is None  # filled blank
    text = (tmp_path / "micro.warnings.txt").read_text()
    assert "no demographics for speaker micro-interview-DEF" in text


def test_parse_no_warnings_removes_stale_file(capsys, tmp_path):
    out = tmp_path / "c.jsonl"
    stale = tmp_path / "c.warnings.txt"
    stale.write_text("old\n", encoding="utf-8")
    code, summary = run(capsys, ["parse", str(FIXTURES / "reading-01.cha"), "--out", str(out)])
    assert code == 0 and summary["warnings"] == 0
    assert not stale.exists()


# --------------------------------------------------------------------- stats


def test_stats(capsys, corpus_file):
    code, summary = run(capsys, ["stats", str(corpus_file)])
    assert code == 0
    assert summary["n_utterances"] == 23
    assert summary["total_duration_s"] == 22.3
    assert summary["pct_with_repetition"] == 21.7
    assert summary["pct_with_interjection"] == 17.4
    assert len(summary["per_speaker_counts"]) == 12


# --------------------------------------------------------------------- split


def test_split(capsys, corpus_file, tmp_path):
    out = tmp_path / "folds.json"
    code, summary = run(
        capsys,
        ["split", str(corpus_file), "--k", "6", "--speakers-per-fold", "2", "--seed", "7", "--out", str(out)],
    )
    assert code == 0
    assert summary["k"] == 6 and summary["seed"] == 7 and summary["substream"] == "split"
    fa = load_fold_file(out)
    assert fa.k == 6 and len(fa.folds()) == 6


def test_split_wrong_counts(capsys, corpus_file, tmp_path):
    code, summary = run(
        capsys,
        ["split", str(corpus_file), "--k", "5", "--speakers-per-fold", "2", "--out", str(tmp_path / "f.json")],
    )
    assert code == 1
    assert "cannot split 12 speakers into 5 folds of 2" in summary["error"]


# ------------------------------------------------------------------- augment


def test_augment_deterministic(capsys, corpus_file, tmp_path):
    out = tmp_path / "aug.jsonl"
    code, summary = run(
        capsys, ["augment", str(corpus_file), "--n", "20", "--seed", "7", "--out", str(out)]
    )
    assert code == 0
    assert summary["n"] == 20 and summary["seed"] == 7
    assert summary["p"] == 87  # (200*20 + 23) // 46
    assert summary["profile"] == "standard" and summary["pool_size"] == 23
    first = out.read_bytes()
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["id"] for r in rows][:3] == ["aug-00000", "aug-00001", "aug-00002"]
    code, _ = run(capsys, ["augment", str(corpus_file), "--n", "20", "--seed", "7", "--out", str(out)])
    assert code == 0
    assert out.read_bytes() == first


def test_augment_respects_training_pool(capsys, corpus_file, tmp_path):
    folds = tmp_path / "folds.json"
    run(capsys, ["split", str(corpus_file), "--k", "6", "--speakers-per-fold", "2", "--seed", "7", "--out", str(folds)])
    out = tmp_path / "aug.jsonl"
    code, summary = run(
        capsys,
        ["augment", str(corpus_file), "--n", "15", "--seed", "1",
         "--fold-file", str(folds), "--test-fold", "0", "--out", str(out)],
    )
    assert code == 0
    held_out = set(load_fold_file(folds).speakers_in_fold(0))
    corpus = load_corpus(corpus_file)
    by_id = {u.id: u for u in corpus.utterances}
    expected_pool = [u for u in corpus.utterances if u.speaker_id not in held_out]
    assert summary["pool_size"] == len(expected_pool)
    for line in out.read_text().splitlines():
        row = json.loads(line)
        assert by_id[row["source_utterance_id"]].speaker_id not in held_out


def test_augment_errors(capsys, corpus_file, tmp_path):
    out = str(tmp_path / "aug.jsonl")
    code, summary = run(capsys, ["augment", str(corpus_file), "--n", "5", "--fold-file", "x.json", "--out", out])
    assert code == 1 and "--fold-file needs --test-fold" in summary["error"]
    code, summary = run(capsys, ["augment", str(corpus_file), "--n", "5", "--test-fold", "0", "--out", out])
    assert code == 1 and "--test-fold needs --fold-file" in summary["error"]
    code, summary = run(capsys, ["augment", str(corpus_file), "--out", out])
    assert code == 1 and "pass --n or set augment.n" in summary["error"]
    code, summary = run(capsys, ["augment", str(corpus_file), "--n", "5", "--weights", "sneeze=2", "--out", out])
    assert code == 1 and "unknown event type 'sneeze'" in summary["error"]
    code, summary = run(capsys, ["augment", str(corpus_file), "--n", "5", "--profile", "mild", "--out", out])
    assert code == 1 and "unknown profile 'mild'" in summary["error"]


def test_config_supplies_defaults_and_flags_override(capsys, corpus_file, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("seed: 3\naugment:\n  n: 5\n  profile: extended\n", encoding="utf-8")
    out_a = tmp_path / "a.jsonl"
    code, summary = run(capsys, ["augment", str(corpus_file), "--config", str(cfg), "--out", str(out_a)])
    assert code == 0
    assert summary["seed"] == 3 and summary["n"] == 5 and summary["profile"] == "extended"

    out_b = tmp_path / "b.jsonl"
    code, summary = run(
        capsys, ["augment", str(corpus_file), "--config", str(cfg), "--seed", "7", "--out", str(out_b)]
    )
    assert code == 0 and summary["seed"] == 7
    assert out_a.read_bytes() != out_b.read_bytes()


def test_bad_config_rejected(capsys, corpus_file, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("sede: 3\n", encoding="utf-8")
    code, summary = run(capsys, ["augment", str(corpus_file), "--config", str(cfg), "--n", "5", "--out", str(tmp_path / "a.jsonl")])
    assert code == 1 and "unknown config key" in summary["error"]


# --------------------------------------------------------------------- synth


@pytest.fixture
def aug_file(capsys, corpus_file, tmp_path):
    out = tmp_path / "aug.jsonl"
    code, _ = run(capsys, ["augment", str(corpus_file), "--n", "4", "--seed", "7", "--out", str(out)])
    assert code == 0
    return out


def test_synth_build_only(capsys, aug_file, tmp_path):
    manifest_out = tmp_path / "manifest.jsonl"
    code, summary = run(
        capsys, ["synth", str(aug_file), "--build-only", "--manifest-out", str(manifest_out), "--seed", "7"]
    )
    assert code == 0
    assert summary["jobs"] == 4 and summary["seed"] == 7 and summary["substream"] == "voice"
    manifest = load_manifest(manifest_out)
    assert len(manifest.jobs) == 4
    assert manifest.created_from == str(aug_file)
    meta = json.loads(manifest_out.with_suffix(".meta.json").read_text())
    assert meta["seed"] == 7

    code, summary = run(capsys, ["synth", str(aug_file), "--build-only"])
    assert code == 1 and "--build-only needs --manifest-out" in summary["error"]


def test_synth_executes_manifest(capsys, aug_file, tmp_path, tts_double):
    out_dir = tmp_path / "synth"
    code, summary = run(
        capsys,
        ["synth", str(aug_file), "--seed", "7", "--endpoint", tts_double,
         "--out-dir", str(out_dir), "--concurrency", "2", "--retry-backoff", "0.01"],
    )
    assert code == 0
    assert summary["status"] == "ok" and summary["jobs"] == 4
    assert summary["ok"] == 4 and summary["failed"] == 0 and summary["skipped"] == 0
    report_rows = [json.loads(l) for l in Path(summary["report"]).read_text().splitlines()]
    assert len(report_rows) == 4
    for row in report_rows:
        assert row["status"] == "ok"
        assert (out_dir / "audio" / f"{row['job_id']}.wav").exists()

    # rerun skips everything that already validated
    code, summary = run(
        capsys,
        ["synth", str(aug_file), "--seed", "7", "--endpoint", tts_double, "--out-dir", str(out_dir)],
    )
    assert code == 0 and summary["skipped"] == 4 and summary["ok"] == 0


def test_synth_partial_failure_exits_two(capsys, aug_file, tmp_path, tts_double):
    voices = tmp_path / "voices.json"
    voices.write_text(json.dumps([{"provider": "mock", "voice_id": "bad-voice"}]))
    code, summary = run(
        capsys,
        ["synth", str(aug_file), "--seed", "7", "--endpoint", tts_double,
         "--out-dir", str(tmp_path / "synth"), "--voices", str(voices), "--retry-attempts", "1"],
    )
    assert code == 2
    assert summary["status"] == "partial" and summary["failed"] == 4


def test_synth_endpoint_from_environment(capsys, aug_file, tmp_path, tts_double, monkeypatch):
    monkeypatch.setenv(ENV_SIDECAR_URL, tts_double)
    code, summary = run(capsys, ["synth", str(aug_file), "--seed", "7", "--out-dir", str(tmp_path / "s")])
    assert code == 0 and summary["ok"] == 4

    monkeypatch.delenv(ENV_SIDECAR_URL)
    code, summary = run(capsys, ["synth", str(aug_file), "--seed", "7", "--out-dir", str(tmp_path / "t")])
    assert code == 1 and "no service endpoint" in summary["error"]


def test_synth_fluent_build_only(capsys, corpus_file, tmp_path):
    manifest_out = tmp_path / "fluent.jsonl"
    code, summary = run(
        capsys,
        ["synth-fluent", str(corpus_file), "--seed", "7", "--build-only", "--manifest-out", str(manifest_out)],
    )
    assert code == 0
    assert summary["jobs"] == 22 and summary["skipped_empty"] == 1
    manifest = load_manifest(manifest_out)
    assert all(j.voice.provider.value == "speaker_vector_style" for j in manifest.jobs)


# ------------------------------------------------------------ eval and report


def test_eval_bias_report_flow(capsys, fixtures_dir, tmp_path):
    refs = str(fixtures_dir / "eval20.refs.jsonl")
    cond = tmp_path / "cond.json"
    code, summary = run(
        capsys,
        ["eval", "--refs", refs, "--hyps", str(fixtures_dir / "eval20.hyps.jsonl"),
         "--emb", str(fixtures_dir / "eval20.emb.tsv"), "--out", str(cond)],
    )
    assert code == 0
    assert summary["pooled_wer"] == 0.25
    assert summary["n_scored"] == 20 and summary["n_uncovered"] == 0

    perfect = tmp_path / "perfect.json"
    code, summary = run(
        capsys,
        ["eval", "--refs", refs, "--hyps", refs,
         "--emb", str(fixtures_dir / "eval20.perfect.emb.tsv"),
         "--condition", "perfect", "--out", str(perfect)],
    )
    assert code == 0 and summary["pooled_wer"] == 0.0

    bias = tmp_path / "bias.json"
    code, summary = run(capsys, ["bias", "--fb", str(cond), "--fbn", str(perfect), "--out", str(bias)])
    assert code == 0
    assert summary["delta_wer"] == 0.25
    assert summary["delta_f1"] < 0

    prefix = tmp_path / "report"
    code, summary = run(
        capsys,
        ["report", "--in", str(cond), str(perfect), "--bias", str(bias),
         "--format", "md,csv,json", "--out-prefix", str(prefix)],
    )
    assert code == 0
    assert summary["written"] == [f"{prefix}.md", f"{prefix}.csv", f"{prefix}.json"]
    md = (tmp_path / "report.md").read_text()
    assert "| run | .2500 |" in md
    assert "## accuracy bias (disfluent minus non-disfluent)" in md
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["bias"]["delta_wer"] == 0.25


def test_eval_needs_an_embedding_source(capsys, fixtures_dir, monkeypatch):
    monkeypatch.delenv(ENV_SIDECAR_URL, raising=False)
    code, summary = run(
        capsys,
        ["eval", "--refs", str(fixtures_dir / "eval20.refs.jsonl"),
         "--hyps", str(fixtures_dir / "eval20.hyps.jsonl")],
    )
    assert code == 1 and "no embedding source" in summary["error"]


def test_eval_sidecar_unreachable(capsys, fixtures_dir, tmp_path):
    code, summary = run(
        capsys,
        ["eval", "--refs", str(fixtures_dir / "eval20.refs.jsonl"),
         "--hyps", str(fixtures_dir / "eval20.hyps.jsonl"),
         "--emb", "http://127.0.0.1:1", "--out", str(tmp_path / "c.json")],
    )
    assert code == 1 and summary["status"] == "error"


def test_report_rejects_unknown_format(capsys, fixtures_dir, tmp_path):
    cond = tmp_path / "cond.json"
    run(
        capsys,
        ["eval", "--refs", str(fixtures_dir / "eval20.refs.jsonl"),
         "--hyps", str(fixtures_dir / "eval20.hyps.jsonl"),
         "--emb", str(fixtures_dir / "eval20.emb.tsv"), "--out", str(cond)],
    )
    code, summary = run(capsys, ["report", "--in", str(cond), "--format", "pdf", "--out-prefix", str(tmp_path / "r")])
    assert code == 1 and "unknown report format" in summary["error"]


def test_mock_embed_eval_with_corpus_refs_and_breakdowns(capsys, corpus_file, tmp_path):
    corpus = load_fixture_corpus()
    hyp_rows = []
    for u in corpus.utterances:
        try:
            hyp_rows.append({"utterance_id": u.id, "text": " ".join(derive_fluent_text(u))})
        except FluentEmptyError:
            pass
    hyps = write_jsonl(tmp_path / "hyps.jsonl", hyp_rows)

    emb = tmp_path / "emb.tsv"
    code, summary = run(
        capsys,
        ["mock-embed", "--refs", str(corpus_file), "--ref-field", "fluent",
         "--hyps", str(hyps), "--out", str(emb)],
    )
    assert code == 0
    assert summary["dim"] == 16 and summary["model"] == "mock-hash-v1"

    cond = tmp_path / "cond.json"
    code, summary = run(
        capsys,
        ["eval", "--refs", str(corpus_file), "--ref-field", "fluent", "--hyps", str(hyps),
         "--emb", str(emb), "--condition", "fixture", "--out", str(cond)],
    )
    assert code == 0
    assert summary["n_scored"] == 22  # the all-disfluent utterance has no fluent text
    assert summary["pooled_wer"] == 0.0
    assert summary["mean_f1_rescaled"] == pytest.approx(1.0)

    prefix = tmp_path / "full"
    code, summary = run(
        capsys,
        ["report", "--in", str(cond), "--corpus", str(corpus_file),
         "--format", "md", "--out-prefix", str(prefix)],
    )
    assert code == 0
    md = (tmp_path / "full.md").read_text()
    assert "## fixture: by setting" in md
    assert "## fixture: by speaker" in md
    assert "## fixture: by disfluency kind" in md
    assert "| 26f |" in md
