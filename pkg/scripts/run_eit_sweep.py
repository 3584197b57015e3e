#!/usr/bin/env python
"""Sweep the probe-reflection window of the bundled reference device.

Writes eit_NNN.csv reflection traces and eit_summary.csv with the fitted
window width, the half-depth width, and the lock-in validity flag for
each drive point.
"""

import os
import sys

from omcool.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIG = os.path.join(HERE, "..", "configs", "reference_device.cfg")

if __name__ == "__main__":
    sys.exit(main(["eit", CONFIG] + sys.argv[1:]))
