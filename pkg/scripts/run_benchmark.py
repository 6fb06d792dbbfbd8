#!/usr/bin/env python3
"""Run the full 60 s benchmark pipeline and write every artifact.

Generates the training dataset, trains the impedance estimator, runs the
fixed-gain and adaptive modes, and writes traces, estimate logs, and the
comparison report under --out.
"""

import sys

from vsglab.cli import main

if __name__ == "__main__":
    sys.exit(main(["paper-repro"] + sys.argv[1:]))
