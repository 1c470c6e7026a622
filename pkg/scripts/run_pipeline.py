#!/usr/bin/env python3
"""Run the whole corpus pipeline on the committed example transcripts.

Offline by default: synthesis stops at the manifest and scoring uses mock
embeddings written to disk. Pass --endpoint to actually synthesize audio
against a running TTS service.

    python3 scripts/run_pipeline.py --out-dir out/demo --n 50 --seed 7
"""

import argparse
import json
import sys
from pathlib import Path

from disfluency_kit.cli import main as dfkit

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "tests" / "fixtures"


def step(argv: list[str]) -> None:
    print(f"$ dfkit {' '.join(argv)}", file=sys.stderr)
    code = dfkit(argv)
    if code not in (0, 2):
        raise SystemExit(code)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/pipeline", help="working directory")
    ap.add_argument("--n", type=int, default=50, help="augmented utterances to generate")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--profile", default="standard", choices=["standard", "extended"])
    ap.add_argument("--endpoint", help="TTS service URL; omit to stop at the manifest")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = out / "corpus.jsonl"
    folds = out / "folds.json"
    aug = out / "aug.jsonl"
    manifest = out / "manifest.jsonl"

    step(["parse", *sorted(str(p) for p in FIXTURES.glob("*.cha")), "--out", str(corpus)])
    step(["stats", str(corpus)])
    step(["split", str(corpus), "--seed", str(args.seed), "--out", str(folds)])
    step([
        "augment", str(corpus), "--n", str(args.n), "--profile", args.profile,
        "--seed", str(args.seed), "--fold-file", str(folds), "--test-fold", "0",
        "--out", str(aug),
    ])

    synth = ["synth", str(aug), "--seed", str(args.seed), "--manifest-out", str(manifest)]
    if args.endpoint:
        step(synth + ["--endpoint", args.endpoint, "--out-dir", str(out / "audio_run")])
    else:
        step(synth + ["--build-only"])

    # hypotheses from a pretend ASR that drops every disfluency
    hyps = out / "hyps.jsonl"
    with hyps.open("w", encoding="utf-8") as f:
        for line in aug.read_text(encoding="utf-8").splitlines():
            row = json.loads(line)
            f.write(json.dumps({"utterance_id": row["id"], "text": row["fluent_text"]}) + "\n")

    emb = out / "emb.tsv"
    emb_perfect = out / "emb_perfect.tsv"
    step(["mock-embed", "--refs", str(manifest), "--hyps", str(hyps), "--out", str(emb)])
    step(["mock-embed", "--refs", str(hyps), "--hyps", str(hyps), "--out", str(emb_perfect)])

    fb, fbn, bias = out / "fb.json", out / "fbn.json", out / "bias.json"
    step(["eval", "--refs", str(manifest), "--hyps", str(hyps), "--emb", str(emb),
          "--condition", "fb", "--out", str(fb)])
    step(["eval", "--refs", str(hyps), "--hyps", str(hyps), "--emb", str(emb_perfect),
          "--condition", "fbn", "--out", str(fbn)])
    step(["bias", "--fb", str(fb), "--fbn", str(fbn), "--out", str(bias)])
    step(["report", "--in", str(fb), str(fbn), "--bias", str(bias),
          "--out-prefix", str(out / "report")])

    print(f"pipeline outputs in {out}", file=sys.stderr)


if __name__ == "__main__":
    main()
