#!/usr/bin/env python3
"""Residuals of the expansion hierarchy for the two-level family.

Prints the algebraic residual and the differential residual with three
derivative sources (jets, finite differences of exact values, Chebyshev
differentiation of the table), plus the Chebyshev tail ratios.
"""

import argparse
import warnings

import numpy as np

from adiabatic_switch.nenciu import algebraic_residuals, compute_series, differential_residuals
from adiabatic_switch.schedule import build_bump_schedule
from adiabatic_switch.hamiltonian import two_level_family


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, default=0.2)
    ap.add_argument("--N", type=int, default=4)
    ap.add_argument("--M", type=int, default=97)
    args = ap.parse_args()
    warnings.simplefilter("ignore")
    series = compute_series(two_level_family(args.delta, build_bump_schedule()), N=args.N, M=args.M)
    np.set_printoptions(precision=3)
    print("algebraic      ", algebraic_residuals(series))
    for src in ("jet", "fd", "spectral"):
        print(f"diff[{src:8s}]", differential_residuals(series, derivative=src))
    print("tail ratios    ", series.tail_ratios)


if __name__ == "__main__":
    main()
