#!/usr/bin/env python3
"""Desk-scale end-to-end benchmark: prep, index, noise scan, production run,
and KPI reports for every reference pair.

Usage:
    python3 scripts/run_benchmark.py [workdir] [--grid 20] [--perturb 50]

Writes per-pair scan results, generation sets, reports, and distribution
exports under the work directory. With the built-in reference decoder the
whole sweep takes a few minutes; pass --decoder proto:<endpoint> to drive an
external model instead (for example the toy neural decoders).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from molbridge.cli import main as cli_main
from molbridge.harness import DATA_DIR


def sh(args: list[str]) -> None:
    print("+ molbridge " + " ".join(args))
    rc = cli_main(args)
    if rc != 0:
        sys.exit(rc)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("workdir", nargs="?", default="benchmark_out")
    ap.add_argument("--grid", type=int, default=20)
    ap.add_argument("--perturb", type=int, default=50)
    ap.add_argument("--production-perturb", type=int, default=250)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--decoder", default="reference")
    ap.add_argument("--corpus", default=str(DATA_DIR / "corpus_10k.smi"))
    args = ap.parse_args()

    ws = Path(args.workdir)
    ws.mkdir(parents=True, exist_ok=True)

    sh(["prep", args.corpus, str(ws / "corpus"), "--seed", str(args.seed)])
    sh(["index", str(ws / "corpus.train.smi"), str(ws / "index.lix"),
        "--seed", str(args.seed)])
    sh(["fragscores", str(ws / "corpus.train.smi"), str(ws / "frag.bin")])

    import json

    for pair in ("NSAID", "EGFR", "VEGFR", "PI3K"):
        scan_out = ws / f"scan_{pair}.json"
        # novelty for the scan is judged against the held-out split: the
        # reference decoder can only emit training molecules, so novelty
        # against its own index would be zero at every sigma
        sh(["scan", "--pair", pair, "--index", str(ws / "index.lix"),
            "--decoder", args.decoder, "--novelty-ref", str(ws / "corpus.test.smi"),
            "--grid", str(args.grid), "--perturb", str(args.perturb),
            "--seed", str(args.seed), "--out", str(scan_out)])

        sigma_star = json.loads(scan_out.read_text())["sigma_star"]
        print(f"{pair}: sigma* = {sigma_star}")

        # unperturbed SLERP baseline vs the sigma* production run: the
        # report's delta-SAS / novelty / efficiency KPIs compare the two
        for tag, sigma in (("slerp0", 0.0), ("star", sigma_star)):
            gen = ws / f"gen_{pair}_{tag}.tsv"
            sh(["run", "--pair", pair, "--index", str(ws / "index.lix"),
                "--decoder", args.decoder, "--sigma", str(sigma),
                "--grid", str(args.grid), "--perturb", str(args.production_perturb),
                "--seed", str(args.seed), "--out", str(gen)])
            report_args = [
                "report", str(gen), "--pair", pair,
                "--index", str(ws / "index.lix"),
                "--fragscores", str(ws / "frag.bin"),
                "--training-ref", str(ws / "corpus.test.smi"),
                "--out", str(ws / f"report_{pair}_{tag}.json"),
                "--export-dir", str(ws / f"exports_{pair}_{tag}"),
            ]
            if tag == "star":
                report_args += ["--baseline", str(ws / f"report_{pair}_slerp0.json")]
            sh(report_args)

        star = json.loads((ws / f"report_{pair}_star.json").read_text())
        print(
            f"{pair}: counts={star['counts']} delta_sas={star['delta_sas']} "
            f"novelty={star['novelty_pct']}"
        )

    print(f"\nall outputs under {ws}/")


if __name__ == "__main__":
    main()
