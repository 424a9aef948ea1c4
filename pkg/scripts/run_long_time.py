#!/usr/bin/env python3
"""Extended-precision sweep resolving the post-switch decay at s = 1 (about 90 s)."""

import sys
from pathlib import Path

from adiabatic_switch.cli import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    sys.exit(main(["sweep", "--config", str(ROOT / "configs" / "long_time.json"), *sys.argv[1:]]))
