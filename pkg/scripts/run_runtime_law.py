#!/usr/bin/env python3
"""Run-time law check for both configured exponents; prints the JSON reports."""

import sys
from pathlib import Path

from adiabatic_switch.cli import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    codes = [main(["runtime-check", "--config", str(ROOT / "configs" / name), *sys.argv[1:]])
             for name in ("runtime_law.json", "runtime_law_exponent4.json")]
    sys.exit(max(codes))
