#!/usr/bin/env python3
"""Phase margins of the active power loop over grid strength.

Prints fixed-gain and rescheduled margins side by side for a list of
short-circuit ratios and writes the Bode CSVs.
"""

import argparse
import sys

from vsglab.cli import main


def run(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scr-list", default="2,8,20")
    p.add_argument("--out", default="out/bode")
    args = p.parse_args(argv)
    print("fixed baseline gains:")
    rc = main(["bode", "--scr-list", args.scr_list, "--out", args.out])
    if rc:
        return rc
    print("rescheduled gains:")
    return main(["bode", "--scr-list", args.scr_list, "--scheduled", "--out", args.out])


if __name__ == "__main__":
    sys.exit(run())
