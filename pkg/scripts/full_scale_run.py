#!/usr/bin/env python3
"""Run the three-modality comparison experiment at a configurable scale.

Defaults mirror the 4-speaker setting (300 epochs); --speakers 8 switches to
the 8-speaker setting (500 epochs). Results land in --out as a comparison
table, per-modality curves, and checkpoints.
"""
import argparse
import sys
import time

from neurospeaker.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="experiment_out")
    parser.add_argument("--speakers", type=int, default=4, choices=(4, 8))
    parser.add_argument("--utterances", type=int, default=50, help="per speaker")
    parser.add_argument("--duration", type=float, default=2.0, help="seconds per utterance")
    parser.add_argument("--separability", type=float, default=1.0)
    parser.add_argument("--noise-db", type=float, default=-40.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=None, help="override the per-setting default")
    parser.add_argument("--svg", action="store_true")
    args = parser.parse_args()

    cli_args = [
        "experiment",
        "--out", args.out,
        "--seed", str(args.seed),
        "--set", f"synth.n_speakers={args.speakers}",
        "--set", f"synth.utterances_per_speaker={args.utterances}",
        "--set", f"synth.duration_s={args.duration}",
        "--set", f"synth.separability={args.separability}",
        "--set", f"synth.noise_db={args.noise_db}",
    ]
    if args.epochs is not None:
        cli_args += ["--set", f"train.epochs={args.epochs}"]
    if args.svg:
        cli_args.append("--svg")

    start = time.perf_counter()
    code = cli_main(cli_args)
    print(f"elapsed: {time.perf_counter() - start:.0f}s")
    return code


if __name__ == "__main__":
    sys.exit(main())
