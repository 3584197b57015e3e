#!/usr/bin/env python
"""Tabulate the detection noise budget of the bundled reference device.

Writes budget.csv with shot-noise levels, excess-noise background, the
predicted spectral signal-to-noise at each drive point, and the phonon
imprecision floor with its quantum-limited counterpart.
"""

import os
import sys

from omcool.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIG = os.path.join(HERE, "..", "configs", "reference_device.cfg")

if __name__ == "__main__":
    sys.exit(main(["budget", CONFIG] + sys.argv[1:]))
