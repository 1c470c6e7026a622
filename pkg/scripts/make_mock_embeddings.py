#!/usr/bin/env python3
"""Write a deterministic embedding file for a reference/hypothesis pair.

Equivalent to `dfkit mock-embed`; kept as a script so embedding files for new
evaluation fixtures can be regenerated without remembering the flag spelling.

    python3 scripts/make_mock_embeddings.py refs.jsonl hyps.jsonl emb.tsv
"""

import argparse

from disfluency_kit.cli import main as dfkit


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("refs", help="corpus, manifest, or {utterance_id, text} JSONL")
    ap.add_argument("hyps", help="hypotheses JSONL")
    ap.add_argument("out", help="embedding file to write")
    ap.add_argument("--ref-field", default="verbatim", choices=["verbatim", "fluent"])
    ap.add_argument("--dim", type=int, default=16)
    args = ap.parse_args()
    raise SystemExit(
        dfkit([
            "mock-embed", "--refs", args.refs, "--ref-field", args.ref_field,
            "--hyps", args.hyps, "--dim", str(args.dim), "--out", args.out,
        ])
    )


if __name__ == "__main__":
    main()
