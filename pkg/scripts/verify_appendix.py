#!/usr/bin/env python3
"""Check the appendix inequalities over the standard ranges; exit 2 on any failure."""

import sys

from adiabatic_switch.cli import main

if __name__ == "__main__":
    sys.exit(main(["verify-appendix", *sys.argv[1:]]))
