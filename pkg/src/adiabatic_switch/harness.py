"""Config-driven experiments: tau sweeps, slope fits, bound overlays, run-time law.

Outputs are flat files with a determinism contract: identical configuration
(including the seed) gives byte-identical ``sweep.csv`` and ``fits.json``.
Floats are written as their shortest round-trip decimal (``repr``).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .bounds import BoundParams, InfeasibleTruncationError, optimal_truncation
from .errors import BudgetError, ConfigurationError, DomainError
from .hamiltonian import interpolating_family, refined_min_gap, track_band, two_level_family
from .propagator import MAX_STEPS, evolve
from .schedule import fit_gevrey_constants, schedule_by_name

SCHEMA_VERSION = 1
SWEEP_HEADER = ("tau", "delta", "min_gap", "s", "dist", "norm_drift")
MAX_S = 4.0
TRACK_GRID = 401


# --------------------------------------------------------------------------
# matrix codec
# --------------------------------------------------------------------------

def encode_matrix(A) -> list:
    """Row-major nested list of [re, im] pairs."""
    A = np.asarray(A, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


def decode_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigurationError(
            f"matrix must be a square array of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilySpec:
    """Either the canonical two-level avoided crossing or explicit endpoints."""

    kind: str = "two_level"
    schedule: str = "bump"
    H_I: tuple | None = None
    H_F: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("two_level", "matrices"):
            raise ConfigurationError(f"unknown family kind {self.kind!r}")
        if self.kind == "matrices" and (self.H_I is None or self.H_F is None):
            raise ConfigurationError("a 'matrices' family needs H_I and H_F")

    def build(self, delta: float | None = None):
        sched = schedule_by_name(self.schedule)
        if self.kind == "two_level":
            if delta is None:
                raise ConfigurationError("two-level family needs a delta")
            return two_level_family(float(delta), sched)
        return interpolating_family(decode_matrix(self.H_I), decode_matrix(self.H_F), sched)


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of a sweep and of the run-time-law check.

    Attributes
    ----------
    family : FamilySpec
    band : int
        Ascending eigenvalue index of the tracked band at s = 0.
    tau_min, tau_max, tau_points : float, float, int
        Log-spaced run-time grid (``taus`` overrides it when given).
    deltas : tuple of float
        Gap parameters of the two-level family (ignored for explicit matrices).
    s_points : tuple of float
        Sample points in [0, MAX_S].
    N : int
        Expansion order recorded with the run (used by the ``expand`` command).
    alpha : float
        Gevrey index for the bound overlay and the run-time law.
    bound_source : {"fitted", "explicit"}
        Fit (C, R) from the schedule derivatives or take ``C``, ``R`` as given.
    precision : {"double", "extended"}
    runtime_deltas, runtime_K, runtime_exponent, runtime_threshold, max_tau
        Run-time-law settings; the exponent defaults to 6 alpha.
    max_steps : int
        Step budget of a single double-precision trajectory.
    """

    schema_version: int = SCHEMA_VERSION
    family: FamilySpec = field(default_factory=FamilySpec)
    band: int = 0
    tau_min: float = 1e2
    tau_max: float = 1e5
    tau_points: int = 13
    taus: tuple | None = None
    deltas: tuple = (0.4, 0.2, 0.1, 0.05)
    s_points: tuple = (0.25, 0.5, 0.75, 1.0)
    N: int = 2
    alpha: float = 2.0
    bound_source: str = "fitted"
    C: float | None = None
    R: float | None = None
    gevrey_k_max: int = 12
    precision: str = "double"
    fit_decade: float = 10.0
    runtime_deltas: tuple = (0.4, 0.2, 0.1)
    runtime_K: float = 4.0
    runtime_exponent: float | None = None
    runtime_threshold: float = 0.05
    max_tau: float = 1e7
    max_steps: int = MAX_STEPS
    output_dir: str = "out"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported schema version {self.schema_version} (expected {SCHEMA_VERSION})")
        taus = self.tau_grid
        if np.any(taus <= 0) or np.any(np.diff(taus) <= 0):
            raise ConfigurationError("tau grid must be positive and strictly ascending")
        s = np.asarray(self.s_points, dtype=float)
        if s.size == 0 or np.any(s < 0) or np.any(s > MAX_S):
            raise ConfigurationError(f"s points must lie in [0, {MAX_S}]")
        if self.family.kind == "two_level" and not self.deltas:
            raise ConfigurationError("the two-level family needs at least one delta")
        if any(d <= 0 for d in self.deltas) or any(d <= 0 for d in self.runtime_deltas):
            raise ConfigurationError("deltas must be positive")
        if self.bound_source not in ("fitted", "explicit"):
            raise ConfigurationError(f"unknown bound source {self.bound_source!r}")
        if self.bound_source == "explicit" and (self.C is None or self.R is None):
            raise ConfigurationError("explicit bound source needs C and R")
        if self.precision not in ("double", "extended"):
            raise ConfigurationError(f"unknown precision {self.precision!r}")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")

    @property
    def tau_grid(self) -> np.ndarray:
        if self.taus is not None:
            return np.asarray(self.taus, dtype=float)
        if self.tau_points == 1:
            return np.array([float(self.tau_min)])
        return np.logspace(math.log10(self.tau_min), math.log10(self.tau_max), self.tau_points)

    @property
    def gap_parameters(self) -> tuple:
        return tuple(self.deltas) if self.family.kind == "two_level" else (math.nan,)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = asdict(self.family)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if "schema_version" not in data:
            raise ConfigurationError("config is missing 'schema_version'")
        fam = data.get("family", {})
        if not isinstance(fam, FamilySpec):
            fam_known = {f.name for f in fields(FamilySpec)}
            if set(fam) - fam_known:
                raise ConfigurationError(f"unknown family keys: {sorted(set(fam) - fam_known)}")
            fam = FamilySpec(**{k: (_tuplify(v) if k in ("H_I", "H_F") else v)
                                for k, v in fam.items()})
        data["family"] = fam
        for key in ("taus", "deltas", "s_points", "runtime_deltas"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except (json.JSONDecodeError, TypeError) as exc:
            raise ConfigurationError(f"invalid config: {exc}") from exc


def _tuplify(x):
    if x is None:
        return None
    return tuple(_tuplify(v) for v in x) if isinstance(x, (list, tuple)) else x


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_json(Path(path).read_text())


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------

def fit_loglog_slope(points) -> tuple:
    """Least-squares line through (ln x, ln y).

    Returns
    -------
    (slope, intercept, r_squared)
        R^2 is 1 when y is exactly reproduced (including constant y).
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise DomainError("need at least three (x, y) pairs")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise DomainError("log-log fit needs finite positive values")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 or ss_res <= 1e-28 * max(ss_tot, 1.0) else max(0.0, 1.0 - ss_res / ss_tot)
    return float(slope), float(intercept), float(r2)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    tau: float
    delta: float
    min_gap: float
    s: float
    dist: float
    norm_drift: float
    bound: float | None = None

    def sort_key(self):
        return (_nan_key(self.delta), self.tau, self.s)


def _nan_key(x):
    return -math.inf if math.isnan(x) else x


@dataclass
class SweepResult:
    records: list
    fits: dict
    bound_params: dict
    meta: dict = field(default_factory=dict)


def gevrey_constants(cfg: ExperimentConfig, fam) -> tuple:
    """(C, R) for the Hamiltonian family: fitted from f or taken from the config."""
    if cfg.bound_source == "explicit":
        return max(float(cfg.C), 1.0), max(float(cfg.R), 1.0)
    scale = float(np.linalg.norm(fam.difference, 2))
    fit = fit_gevrey_constants(fam.schedule, cfg.alpha, cfg.gevrey_k_max, scale=scale)
    return max(fit.C, 1.0), max(fit.R, 1.0)


def measured_min_gap(fam, band: int = 0) -> float:
    path = track_band(fam, np.linspace(0.0, 1.0, TRACK_GRID), band)
    return refined_min_gap(fam, path)


def assembled_bound_value(tau: float, params: BoundParams):
    """Remainder at N_opt plus partial sum, or None when the precondition fails."""
    try:
        plan = optimal_truncation(tau, params)
    except InfeasibleTruncationError:
        return None
    return plan.remainder_estimate + plan.partial_sum_estimate


def _fit_group(recs, tau_lo):
    pts = [(r.tau, r.dist) for r in recs if r.tau >= tau_lo * (1 - 1e-12) and r.dist > 0]
    if len(pts) < 3:
        return None
    slope, intercept, r2 = fit_loglog_slope(pts)
    return {"slope": slope, "intercept": intercept, "r_squared": r2, "n_points": len(pts)}


def compute_fits(records, cfg: ExperimentConfig) -> dict:
    """Slopes per (delta, s) over the whole grid and over the upper tau decade."""
    taus = cfg.tau_grid
    upper_lo = taus[-1] / cfg.fit_decade
    groups = {}
    for r in records:
        groups.setdefault((r.delta, r.s), []).append(r)
    out = []
    for (delta, s), recs in sorted(groups.items(), key=lambda kv: (_nan_key(kv[0][0]), kv[0][1])):
        recs = sorted(recs, key=lambda r: r.tau)
        with_bound = [r for r in recs if r.bound is not None]
        out.append({
            "delta": None if math.isnan(delta) else delta,
            "s": s,
            "full": _fit_group(recs, taus[0]),
            "upper_decade": _fit_group(recs, upper_lo),
            "bound_checked": len(with_bound),
            "bound_violations": sum(1 for r in with_bound if r.dist > r.bound),
        })
    return {"groups": out}


def _run_point(fam, tau, s_points, band, precision, max_steps):
    return evolve(fam, tau, sample_points=s_points, band=band, precision=precision,
                  max_steps=max_steps)


def run_sweep(cfg: ExperimentConfig, *, flush_dir=None) -> SweepResult:
    """Evolve every (tau, delta) pair and record distances at the sample points.

    Work items run on a pool of ``cfg.threads`` workers; results are sorted
    canonically by (delta, tau, s).  If a work item fails and ``flush_dir``
    is given, the records completed so far are written there before the
    exception propagates.
    """
    s_points = tuple(float(x) for x in cfg.s_points)
    families, gaps, bparams = {}, {}, {}
    for delta in cfg.gap_parameters:
        fam = cfg.family.build(None if math.isnan(delta) else delta)
        families[delta] = fam
        gaps[delta] = measured_min_gap(fam, cfg.band)
        C, R = gevrey_constants(cfg, fam)
        bparams[delta] = BoundParams(C=C, R=R, alpha=cfg.alpha, g=min(gaps[delta], 1.0))
    items = [(delta, float(tau)) for delta in cfg.gap_parameters for tau in cfg.tau_grid]
    records = []
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        futures = [(d, t, pool.submit(_run_point, families[d], t, s_points, cfg.band,
                                      cfg.precision, cfg.max_steps)) for d, t in items]
        error = None
        for d, t, fut in futures:
            try:
                traj = fut.result()
            except Exception as exc:  # noqa: BLE001 - re-raised after flushing
                error = error or exc
                continue
            drift = traj.norm_drift
            bound = assembled_bound_value(t, bparams[d])
            for s, dist in zip(traj.s, traj.distances):
                records.append(SweepRecord(tau=t, delta=d, min_gap=gaps[d], s=float(s),
                                           dist=float(dist), norm_drift=drift, bound=bound))
    records.sort(key=SweepRecord.sort_key)
    result = SweepResult(
        records=records,
        fits=compute_fits(records, cfg) if error is None else {"groups": []},
        bound_params={("nan" if math.isnan(d) else repr(d)): asdict(p) for d, p in bparams.items()},
        meta={"seed": cfg.seed, "precision": cfg.precision, "schema_version": SCHEMA_VERSION,
              "n_tau": len(cfg.tau_grid), "complete": error is None},
    )
    if error is not None:
        if flush_dir is not None:
            emit_outputs(result, flush_dir)
        raise error
    return result


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return "nan"
    return repr(float(x))


def _json_clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_clean(obj.item())
    return obj


def sweep_csv_text(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in records:
        w.writerow([_fmt(r.tau), _fmt(r.delta), _fmt(r.min_gap), _fmt(r.s),
                    _fmt(r.dist), _fmt(r.norm_drift)])
    return buf.getvalue()


def fits_json_text(result: SweepResult) -> str:
    payload = {"fits": result.fits, "bound_params": result.bound_params, "meta": result.meta}
    return json.dumps(_json_clean(payload), indent=2, sort_keys=True) + "\n"


def _label(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def emit_outputs(result: SweepResult, directory) -> list:
    """Write sweep.csv, fits.json and plotdata/dist_delta<d>_s<s>.dat.

    Each .dat file has the columns ``tau dist bound`` (bound = nan where the
    truncation precondition fails).  Returns the written paths, sorted.
    """
    out = Path(directory)
    try:
        (out / "plotdata").mkdir(parents=True, exist_ok=True)
        written = []
        p = out / "sweep.csv"
        p.write_text(sweep_csv_text(result.records))
        written.append(p)
        p = out / "fits.json"
        p.write_text(fits_json_text(result))
        written.append(p)
        groups = {}
        for r in result.records:
            groups.setdefault((r.delta, r.s), []).append(r)
        for (delta, s), recs in groups.items():
            p = out / "plotdata" / f"dist_delta{_label(delta)}_s{_label(s)}.dat"
            lines = ["# tau dist bound"]
            lines += [f"{_fmt(r.tau)} {_fmt(r.dist)} {_fmt(r.bound)}"
                      for r in sorted(recs, key=lambda r: r.tau)]
            p.write_text("\n".join(lines) + "\n")
            written.append(p)
    except OSError as exc:
        raise OSError(f"could not write outputs under {os.fspath(out)}: {exc}") from exc
    return sorted(written)


# --------------------------------------------------------------------------
# run-time law
# --------------------------------------------------------------------------

@dataclass
class RuntimeRow:
    delta: float
    gap: float
    tau_scaled: float
    dist_scaled: float
    tau_fixed: float
    dist_fixed: float


@dataclass
class RuntimeReport:
    rows: list
    threshold: float
    K: float
    exponent: float
    below_threshold: bool
    non_increasing: bool
    fixed_exceeds: bool

    @property
    def passed(self) -> bool:
        return self.below_threshold and self.non_increasing and self.fixed_exceeds

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def runtime_tau(gap: float, K: float, exponent: float) -> float:
    """K g^{-2} |ln g|^{exponent}."""
    if not 0.0 < gap < 1.0:
        raise DomainError(f"gap must lie in (0, 1) (got {gap})")
    return float(K * gap ** -2 * abs(math.log(gap)) ** exponent)


def runtime_law_check(cfg: ExperimentConfig) -> RuntimeReport:
    """Scale tau with the gap and compare against a fixed tau.

    For every delta, tau(g) = K g^{-2} |ln g|^{exponent} with the measured
    minimal gap g; the distance at s = 1 is recorded.  The comparison run
    keeps tau at its value for the largest gap.
    """
    deltas = sorted(cfg.runtime_deltas, reverse=True)
    if len(deltas) < 2:
        raise ConfigurationError("run-time check needs at least two gap parameters")
    exponent = cfg.runtime_exponent if cfg.runtime_exponent is not None else 6.0 * cfg.alpha
    fams = [cfg.family.build(d) if cfg.family.kind == "two_level" else cfg.family.build()
            for d in deltas]
    gaps = [measured_min_gap(f, cfg.band) for f in fams]
    taus = [runtime_tau(g, cfg.runtime_K, exponent) for g in gaps]
    feasible = [g for g, t in zip(gaps, taus) if t <= cfg.max_tau]
    if len(feasible) < len(gaps):
        raise BudgetError(
            f"run time {max(taus):.4g} exceeds the budget {cfg.max_tau:.4g}",
            largest_feasible_gap=min(feasible) if feasible else None)
    tau_fixed = taus[0]
    rows = []
    for d, fam, g, t in zip(deltas, fams, gaps, taus):
        ds = float(evolve(fam, t, sample_points=(1.0,), band=cfg.band,
                          precision=cfg.precision).distances[0])
        df = float(evolve(fam, tau_fixed, sample_points=(1.0,), band=cfg.band,
                          precision=cfg.precision).distances[0])
        rows.append(RuntimeRow(delta=d, gap=g, tau_scaled=t, dist_scaled=ds,
                               tau_fixed=tau_fixed, dist_fixed=df))
    dists = [r.dist_scaled for r in rows]
    return RuntimeReport(
        rows=rows, threshold=cfg.runtime_threshold, K=cfg.runtime_K, exponent=exponent,
        below_threshold=all(x <= cfg.runtime_threshold for x in dists),
        non_increasing=all(b <= a for a, b in zip(dists, dists[1:])),
        fixed_exceeds=rows[-1].dist_fixed > cfg.runtime_threshold,
    )


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    """Copy of ``cfg`` with the non-None keyword values replaced."""
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
