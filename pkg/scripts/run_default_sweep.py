#!/usr/bin/env python3
"""Run the default tau sweep (double precision) and write sweep.csv, fits.json, plotdata/."""

import sys
from pathlib import Path

from adiabatic_switch.cli import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    sys.exit(main(["sweep", "--config", str(ROOT / "configs" / "default_sweep.json"), *sys.argv[1:]]))
