"""Command-line interface.

Exit codes: 0 success, 1 error, 2 a verification ran and failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bounds as bd
from .appendix import verify_appendix
from .errors import AdiabaticSwitchError, NormalizationWarning
from .hamiltonian import spectral_frame
from .harness import (ExperimentConfig, emit_outputs, encode_matrix, load_config,
                      run_sweep, runtime_law_check, with_overrides)
from .nenciu import compute_series
from .propagator import evolve
from .schedule import schedule_by_name

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


def _fmt(x) -> str:
    return repr(float(x))


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return with_overrides(cfg, seed=args.seed, threads=args.threads, output_dir=args.out)


def _out_dir(args, cfg) -> Path:
    p = Path(args.out or cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _family(cfg, delta):
    if cfg.family.kind == "two_level":
        return cfg.family.build(cfg.deltas[0] if delta is None else delta)
    return cfg.family.build()


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_schedule(args, cfg):
    sched = schedule_by_name(args.name or cfg.family.schedule)
    s = np.linspace(0.0, 1.0, args.points)
    cols = [sched.value(s)] + [sched.derivative(s, k) for k in range(1, args.k_max + 1)]
    header = ["s", "f"] + [f"d{k}" for k in range(1, args.k_max + 1)]
    path = _out_dir(args, cfg) / "schedule.csv"
    _write_csv(path, header, ([_fmt(si)] + [_fmt(c[i]) for c in cols] for i, si in enumerate(s)))
    print(path)
    return EXIT_OK


def cmd_ham(args, cfg):
    fam = _family(cfg, args.delta)
    s = np.linspace(0.0, 1.0, args.points)
    rows = []
    for si in s:
        fr = spectral_frame(fam, si, cfg.band)
        rows.append([_fmt(si)] + [_fmt(e) for e in fr.energies] + [_fmt(fr.gap)])
    header = ["s"] + [f"E{i}" for i in range(fam.dimension)] + ["gap"]
    path = _out_dir(args, cfg) / "ham.csv"
    _write_csv(path, header, rows)
    print(path)
    return EXIT_OK


def cmd_expand(args, cfg):
    fam = _family(cfg, args.delta)
    series = compute_series(fam, N=args.N or cfg.N, M=args.M, band=cfg.band)
    out = _out_dir(args, cfg)
    payload = {
        "N": series.N,
        "nodes": [float(x) for x in series.grid],
        "B": [[encode_matrix(series.terms[j, i].astype(complex)) for i in range(series.M)]
              for j in range(series.N + 1)],
        "Bdot": [[encode_matrix(series.derivs[j, i].astype(complex)) for i in range(series.M)]
                 for j in range(series.N + 1)],
        "tail_ratios": [float(x) for x in series.tail_ratios],
    }
    (out / "expand.json").write_text(json.dumps(payload) + "\n")
    header = ["s"] + [f"B{j}" for j in range(series.N + 1)] + [f"Bdot{j}" for j in range(series.N + 1)]
    tn = [series.term_norms(j) for j in range(series.N + 1)]
    dn = [series.derivative_norms(j) for j in range(series.N + 1)]
    _write_csv(out / "expand_norms.csv", header,
               ([_fmt(s)] + [_fmt(t[i]) for t in tn] + [_fmt(d[i]) for d in dn]
                for i, s in enumerate(series.grid)))
    print(out / "expand.json")
    return EXIT_OK


def cmd_evolve(args, cfg):
    fam = _family(cfg, args.delta)
    s = np.linspace(0.0, 1.0, args.samples)
    traj = evolve(fam, args.tau, sample_points=s, band=cfg.band,
                  precision=args.precision or cfg.precision)
    path = _out_dir(args, cfg) / "evolve.csv"
    _write_csv(path, ["s", "dist", "norm_drift", "gap"],
               ([_fmt(si), _fmt(d), _fmt(abs(n - 1.0)), _fmt(g)]
                for si, d, n, g in zip(traj.s, traj.distances, traj.norms, traj.gaps)))
    print(path)
    return EXIT_OK


def cmd_sweep(args, cfg):
    out = _out_dir(args, cfg)
    result = run_sweep(cfg, flush_dir=out)
    for p in emit_outputs(result, out):
        print(p)
    return EXIT_OK


def cmd_bounds(args, cfg):
    p = bd.BoundParams(C=args.C, R=args.R, alpha=args.alpha, g=args.g)
    report = {"params": {"C": p.C, "R": p.R, "alpha": p.alpha, "g": p.g},
              "log_L": bd.log_L_bound(args.n, args.k, p), "L": bd.L_bound(args.n, args.k, p)}
    if args.tau is not None:
        report["tau"] = args.tau
        N = args.N if args.N is not None else 0
        report["log_remainder"] = bd.log_remainder_bound(N, args.tau, p)
        try:
            plan = bd.optimal_truncation(args.tau, p)
            ps = bd.partial_sum_bound(plan, p, args.K)
            report["plan"] = {"N_opt": plan.N_opt, "x": plan.x,
                              "remainder": plan.remainder_estimate,
                              "log_remainder": plan.log_remainder,
                              "partial_sum": ps.direct, "closing_bound": ps.closing_bound}
        except bd.InfeasibleTruncationError as exc:
            report["plan"] = {"error": str(exc)}
    if p.g < 1.0:
        report["tau_threshold"] = bd.tau_threshold(p.g, p.alpha, args.K)
    text = json.dumps({k: (v if not isinstance(v, float) or np.isfinite(v) else None)
                       for k, v in report.items()}, indent=2, sort_keys=True)
    (_out_dir(args, cfg) / "bounds.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_verify_appendix(args, cfg):
    report = verify_appendix()
    path = _out_dir(args, cfg) / "appendix.csv"
    _write_csv(path, ["family", "params", "log_lhs", "log_rhs", "margin", "passed"],
               ([r.family, json.dumps(r.params, sort_keys=True), _fmt(r.log_lhs),
                 _fmt(r.log_rhs), _fmt(r.margin), "pass" if r.passed else "fail"]
                for r in report.instances))
    for line in report.summary_lines():
        print(line)
    return EXIT_OK if report.all_passed else EXIT_FAILED


def cmd_runtime_check(args, cfg):
    report = runtime_law_check(cfg)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    (_out_dir(args, cfg) / "runtime_check.json").write_text(text + "\n")
    print(text)
    return EXIT_OK if report.passed else EXIT_FAILED


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="random seed recorded with the run")
    common.add_argument("--threads", type=int, help="worker threads for sweeps")

    parser = argparse.ArgumentParser(prog="adiabatic-switch", parents=[common],
                                     description="Adiabatic switching experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", parents=[common], help="dump f and its derivatives")
    p.add_argument("--name", help="schedule name (default: from config)")
    p.add_argument("--k-max", type=int, default=4)
    p.add_argument("--points", type=int, default=201)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("ham", parents=[common], help="energies and gap along s")
    p.add_argument("--delta", type=float)
    p.add_argument("--points", type=int, default=201)
    p.set_defaults(func=cmd_ham)

    p = sub.add_parser("expand", parents=[common], help="tabulate the expansion terms")
    p.add_argument("--delta", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--M", type=int)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("evolve", parents=[common], help="evolve and sample distances")
    p.add_argument("--delta", type=float)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--samples", type=int, default=11)
    p.add_argument("--precision", choices=("double", "extended"))
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sweep", parents=[common], help="run the configured tau sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", parents=[common], help="evaluate the explicit bounds")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--g", type=float, required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--tau", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--K", type=float, default=4.0)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify-appendix", parents=[common], help="check the appendix inequalities")
    p.set_defaults(func=cmd_verify_appendix)

    p = sub.add_parser("runtime-check", parents=[common], help="run-time law experiment")
    p.set_defaults(func=cmd_runtime_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    warnings.simplefilter("once", NormalizationWarning)
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except (AdiabaticSwitchError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
