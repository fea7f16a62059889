#!/usr/bin/env python3
"""Anomaly-detection experiment: benign-only autoencoder + threshold sweep.

Trains the reconstruction network on the benign flows of a synthetic split,
then scores the held-out mix. Writes per-flow anomaly scores, the confusion
matrix at the 0.03 reconstruction-error threshold, and the threshold sweep
series (the low-FPR / high-FNR trade-off is visible in sweep.tsv).
"""

import argparse
import sys
from pathlib import Path

from flowids.cli import main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/autoencoder")
    parser.add_argument("--seed", type=int, default=21)
    args = parser.parse_args(argv)
    out = Path(args.out)
    rc = main([
        "train",
        "--source", "synthetic",
        "--synth-flows", "20000",
        "--synth-malicious-fraction", "0.1",
        "--synth-separation", "4.0",
        "--model", "autoencoder",
        "--epochs", "20",
        "--batch-size", "256",
        "--seed", str(args.seed),
        "--out", str(out),
    ])
    if rc != 0:
        return rc
    return main([
        "eval",
        "--model-file", str(out / "model.txt"),
        "--source", "synthetic",
        "--synth-flows", "20000",
        "--synth-malicious-fraction", "0.1",
        "--synth-separation", "4.0",
        "--seed", str(args.seed),
        "--out", str(out / "eval"),
    ])


if __name__ == "__main__":
    sys.exit(run())
