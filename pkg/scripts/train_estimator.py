#!/usr/bin/env python3
"""Generate the waveform dataset and train the impedance estimator.

Writes dataset.csv, model.json, and the training diagnostics (error
histogram, regression, MSE trace) under --out.
"""

import argparse
import sys

from vsglab.cli import main


def run(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out/train")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    ds = f"{args.out}/dataset.csv"
    import pathlib
    pathlib.Path(args.out).mkdir(parents=True, exist_ok=True)
    rc = main(["dataset", "--out", ds, "--n", str(args.n), "--seed", str(args.seed)])
    if rc:
        return rc
    return main(["train", "--dataset", ds, "--out", args.out, "--seed", str(args.seed)])


if __name__ == "__main__":
    sys.exit(run())
