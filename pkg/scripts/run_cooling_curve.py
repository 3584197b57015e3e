#!/usr/bin/env python
"""Simulate the bundled reference device and invert the sweep.

Writes per-point spectra, thermometry.csv and cooling_curve.csv under the
configured output directory. Low-drive points can fall below the detection
floor of the modeled receiver; those rows are flagged ok=0 and the exit
code is 3, which this script reports as expected partial coverage.
"""

import os
import sys

from omcool.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIG = os.path.join(HERE, "..", "configs", "reference_device.cfg")

if __name__ == "__main__":
    args = ["cool-curve", CONFIG] + sys.argv[1:]
    status = main(args)
    if status == 3:
        print("done with partial coverage: some low-drive points are below "
              "the receiver noise floor (see report.txt)")
        status = 0
    sys.exit(status)
