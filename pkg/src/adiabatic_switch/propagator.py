"""Integration of i psi' = tau H(s) psi and adiabatic distances.

Two precisions are offered:

``"double"`` (default)
    Adaptive Dormand-Prince 8(5,3) with local error target 1e-12 (tight
    enough that the norm drift stays below 1e-9 up to tau = 1e5).
    Rounding limits distances to about 1e-14.

``"extended"``
    The same Runge-Kutta stages on a uniform grid with tau*||H||*h <= 0.05,
    carried out in double-double arithmetic, and distances evaluated with
    multiprecision eigenvectors.  This resolves the super-polynomially
    small transition amplitudes that remain after the switch (down to about
    1e-30).  The uniform explicit step is not norm-preserving: the norm
    drifts by O(n_steps * (tau h)^6), about 1e-6 at tau = 1e5.  The drift
    is reported, not corrected.

In both modes the switching function is integrated together with psi from
its closed-form derivative; distances are measured against the projector of
the Hamiltonian H_I + f_num(s) (H_F - H_I) that was actually propagated,
which differs from H(s) by the integration tolerance only.  For s > 1 the
Hamiltonian is constant and the state is advanced by its exact exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BudgetError, StiffnessError, ValidationError
from .hamiltonian import HamiltonianFamily, frame_from_matrix, spectral_frame

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-13
H_MIN = 1e-15
MAX_STEPS = 200_000_000
EXTENDED_PHASE_STEP = 0.05


@dataclass(frozen=True, eq=False)
class Trajectory:
    tau: float
    s: np.ndarray
    states: np.ndarray          # (n_samples, d) or (n_samples, d, m)
    distances: np.ndarray
    norms: np.ndarray
    f_values: np.ndarray
    gaps: np.ndarray
    precision: str = "double"
    n_steps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - 1.0))) if len(self.norms) else 0.0


def adiabatic_distance(psi, frame) -> float:
    """||(1 - P) psi||, the distance from psi to Range P."""
    psi = np.asarray(psi, dtype=complex)
    n = np.linalg.norm(psi)
    if abs(n - 1.0) > 1e-6:
        raise ValidationError(f"state norm {n:.8f} deviates from 1 by more than 1e-6")
    return float(np.linalg.norm(psi - frame.P @ psi))


def _band_indices(fam: HamiltonianFamily, band) -> tuple:
    # a gapped band keeps its position in the ascending spectrum for all s
    return spectral_frame(fam, 0.0, band).band


def default_initial_state(fam: HamiltonianFamily, band=0) -> np.ndarray:
    frame = spectral_frame(fam, 0.0, band)
    return frame.vectors[:, frame.band[0]].astype(complex)


def _prepare_samples(sample_points):
    s = np.atleast_1d(np.asarray(sample_points, dtype=float))
    if s.ndim != 1 or s.size == 0:
        raise ValidationError("sample_points must be a non-empty 1-d sequence")
    if np.any(~np.isfinite(s)) or np.any(s < 0.0):
        raise ValidationError("sample points must be finite and >= 0")
    order = np.argsort(s, kind="stable")
    return s, order


def _phase_advance(Hf, psi, tau, ds):
    """exp(-i tau ds Hf) psi via the eigendecomposition."""
    w, V = np.linalg.eigh(Hf)
    return V @ (np.exp(-1j * tau * ds * w)[:, None] * (V.conj().T @ psi.reshape(len(w), -1)))


def evolve(fam: HamiltonianFamily, tau: float, psi0=None, sample_points=(1.0,), *,
           band=0, precision: str = "double", rtol: float = DEFAULT_RTOL,
           atol: float = DEFAULT_ATOL, max_steps: int = MAX_STEPS,
           phase_step: float = EXTENDED_PHASE_STEP) -> Trajectory:
    """Integrate the rescaled Schrodinger equation and sample distances.

    Parameters
    ----------
    fam : HamiltonianFamily
    tau : float
        Run time (>= 0).
    psi0 : array_like, optional
        Unit initial vector; defaults to the first band eigenvector of H(0).
    sample_points : sequence of float
        Points s >= 0 (any order); values beyond 1 use the exact exponential.
    band : int
        Ascending eigenvalue index selecting the tracked band.
    precision : {"double", "extended"}
    """
    tau = float(tau)
    if not math.isfinite(tau) or tau < 0:
        raise ValidationError("tau must be finite and non-negative")
    if precision not in ("double", "extended"):
        raise ValidationError(f"unknown precision {precision!r}")
    band_idx = _band_indices(fam, band)
    if psi0 is None:
        psi0 = default_initial_state(fam, band)
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi0.shape[0] != fam.dimension:
        raise ValidationError("initial state has the wrong dimension")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-12:
        raise ValidationError("initial state must be normalized to 1e-12")
    s, order = _prepare_samples(sample_points)
    if precision == "extended":
        return _evolve_extended(fam, tau, psi0, s, band_idx, phase_step)

    sched = fam.schedule
    HI, D = fam.H_I, fam.difference
    inside = np.minimum(s, 1.0)
    srt = np.sort(inside)
    f0 = float(sched.value(0.0))
    if tau == 0.0:
        Y = np.repeat(psi0[None, :, None], len(srt), axis=0)
        F = np.array([float(sched.value(x)) for x in srt])
        n_acc = 0
    else:
        Y, F, n_acc, n_rej, status = _kernels.dop853_adaptive(
            HI, D, tau, float(sched.beta), f0, psi0[:, None].copy(), srt,
            float(rtol), float(atol), H_MIN, int(max_steps))
        if status == _kernels.STEP_UNDERFLOW:
            raise StiffnessError(
                f"step size fell below {H_MIN} at tau={tau}; reduce tau or the dimension")
        if status == _kernels.MAX_STEPS:
            raise BudgetError(f"step budget {max_steps} exhausted at tau={tau}")
    # map sorted results back to the caller's order
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    states = np.zeros((len(s), fam.dimension), dtype=complex)
    f_vals = np.zeros(len(s))
    dists = np.zeros(len(s))
    gaps = np.zeros(len(s))
    for k, sk in enumerate(s):
        idx = inv[k]
        psi = Y[idx, :, 0]
        fk = F[idx]
        Hs = HI + fk * D
        if sk > 1.0:
            psi = _phase_advance(Hs, psi, tau, sk - 1.0)[:, 0]
        frame = frame_from_matrix(Hs, sk, band=band_idx)
        states[k] = psi
        f_vals[k] = fk
        dists[k] = float(np.linalg.norm(psi - frame.P @ psi))
        gaps[k] = frame.gap
    norms = np.linalg.norm(states, axis=1)
    return Trajectory(tau=tau, s=s, states=states, distances=dists, norms=norms,
                      f_values=f_vals, gaps=gaps, precision="double", n_steps=int(n_acc))


# --------------------------------------------------------------------------
# extended precision
# --------------------------------------------------------------------------

_MP_DPS = 40


def _to_dd(x):
    """Split an mpmath real into (hi, lo) doubles."""
    import mpmath as mp

    hi = float(x)
    return hi, float(x - mp.mpf(hi))


def _mp_band_vectors(H, band_idx):
    import mpmath as mp

    E, V = mp.eighe(H)
    return [[V[i, b] for i in range(H.rows)] for b in band_idx], E


def _mp_matrix(HI, D, f):
    import mpmath as mp

    d = HI.shape[0]
    H = mp.matrix(d, d)
    for a in range(d):
        for c in range(d):
            H[a, c] = mp.mpc(complex(HI[a, c])) + f * mp.mpc(complex(D[a, c]))
    return H


def _evolve_extended(fam, tau, psi0, s, band_idx, phase_step):
    import mpmath as mp

    HI, D = fam.H_I, fam.difference
    f0 = float(fam.schedule.value(0.0))
    if fam.schedule.beta == 0.0:
        # a frozen schedule: propagate the constant Hamiltonian H(0)
        HI, D = fam.at_switch(f0), np.zeros_like(D)
    elif f0 != 0.0:
        raise ValidationError("extended precision requires a schedule starting at f = 0")
    d = fam.dimension
    lam = max(np.linalg.norm(HI, 2), np.linalg.norm(HI + D, 2), 1e-300)
    n_steps = max(4, int(math.ceil(tau * lam / phase_step)))
    n_steps = 4 * ((n_steps + 3) // 4)
    with mp.workdps(_MP_DPS):
        # initial state: the band eigenvector refined in multiprecision when
        # psi0 is the default, otherwise psi0 taken exactly as given
        default = default_initial_state(fam, band_idx[0])
        y0 = np.zeros((4, d, 1))
        if np.allclose(psi0, default, atol=1e-12, rtol=0):
            vecs, _ = _mp_band_vectors(_mp_matrix(HI, D, mp.mpf(0)), band_idx)
            v = vecs[0]
            # align the global phase with the double-precision vector
            ov = sum(mp.conj(mp.mpc(complex(default[i]))) * v[i] for i in range(d))
            ph = ov / abs(ov)
            v = [x / ph for x in v]
            for i in range(d):
                y0[0, i, 0], y0[1, i, 0] = _to_dd(mp.re(v[i]))
                y0[2, i, 0], y0[3, i, 0] = _to_dd(mp.im(v[i]))
        else:
            y0[0, :, 0] = psi0.real
            y0[2, :, 0] = psi0.imag
        inside = np.minimum(s, 1.0)
        pos = inside * n_steps
        steps = np.floor(pos).astype(np.int64)
        frac = pos - steps
        steps = np.minimum(steps, n_steps)
        srt = np.lexsort((frac, steps))
        beta = fam.schedule.beta
        if tau == 0.0:
            Yd = np.repeat(y0[None], len(s), axis=0)
            Fd = np.array([[float(fam.schedule.value(x)), 0.0] for x in inside])
        else:
            Ys, Fs = _kernels.dopri5_dd(HI, D, tau, float(beta), 0.0, y0, n_steps,
                                        steps[srt], frac[srt])
            Yd = np.empty_like(Ys)
            Fd = np.empty_like(Fs)
            Yd[srt] = Ys
            Fd[srt] = Fs
        states = np.zeros((len(s), d), dtype=complex)
        dists = np.zeros(len(s))
        norms = np.zeros(len(s))
        gaps = np.zeros(len(s))
        f_vals = np.zeros(len(s))
        for k in range(len(s)):
            f = mp.mpf(Fd[k, 0]) + mp.mpf(Fd[k, 1])
            H = _mp_matrix(HI, D, f)
            vecs, E = _mp_band_vectors(H, band_idx)
            psi = [mp.mpc(mp.mpf(Yd[k, 0, i, 0]) + mp.mpf(Yd[k, 1, i, 0]),
                          mp.mpf(Yd[k, 2, i, 0]) + mp.mpf(Yd[k, 3, i, 0])) for i in range(d)]
            resid = list(psi)
            for v in vecs:
                ov = sum(mp.conj(v[i]) * psi[i] for i in range(d))
                resid = [resid[i] - v[i] * ov for i in range(d)]
            dists[k] = float(mp.sqrt(sum(abs(x) ** 2 for x in resid)))
            norms[k] = float(mp.sqrt(sum(abs(x) ** 2 for x in psi)))
            vec = np.array([complex(x) for x in psi])
            Hs = HI + float(f) * D
            if s[k] > 1.0:
                vec = _phase_advance(Hs, vec, tau, s[k] - 1.0)[:, 0]
            states[k] = vec
            f_vals[k] = float(f)
            Ef = [E[i] for i in range(len(E))]
            Eb = sum(Ef[i] for i in band_idx) / len(band_idx)
            others = [abs(Ef[i] - Eb) for i in range(len(Ef)) if i not in band_idx]
            gaps[k] = float(min(others)) if others else np.inf
    return Trajectory(tau=tau, s=s, states=states, distances=dists, norms=norms,
                      f_values=f_vals, gaps=gaps, precision="extended", n_steps=int(n_steps),
                      meta={"phase_step": phase_step})


# --------------------------------------------------------------------------
# propagators and the Heisenberg picture
# --------------------------------------------------------------------------

def propagator_matrix(fam: HamiltonianFamily, tau: float, s: float, *,
                      rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """U_tau(s, 0) from evolving the full standard basis."""
    tau = float(tau)
    s = float(s)
    if s < 0:
        raise ValidationError("s must be >= 0")
    d = fam.dimension
    y0 = np.eye(d, dtype=complex)
    if tau == 0.0 or s == 0.0:
        return y0
    sched = fam.schedule
    Y, F, _, _, status = _kernels.dop853_adaptive(
        fam.H_I, fam.difference, tau, float(sched.beta), float(sched.value(0.0)), y0,
        np.array([min(s, 1.0)]), float(rtol), float(atol), H_MIN, MAX_STEPS)
    if status != _kernels.OK:
        raise StiffnessError(f"integration failed with status {status} at tau={tau}")
    U = Y[0]
    if s > 1.0:
        U = _phase_advance(fam.H_I + F[0] * fam.difference, U, tau, s - 1.0)
    return U


def heisenberg_projector(fam: HamiltonianFamily, tau: float, s: float, band=0, **kw) -> np.ndarray:
    """P_tau(s) = U_tau(s, 0) P_I U_tau(s, 0)^+."""
    P_I = spectral_frame(fam, 0.0, band).P
    if float(s) == 0.0:
        return P_I.copy()
    U = propagator_matrix(fam, tau, s, **kw)
    return U @ P_I @ U.conj().T


def evolve_fixed_step(fam: HamiltonianFamily, tau: float, psi0, s_end: float, n_steps: int):
    """Reference: classical RK4 with f sampled from the schedule itself."""
    if not 0.0 < s_end <= 1.0:
        raise ValidationError("s_end must lie in (0, 1]")
    h = s_end / n_steps
    nodes = np.linspace(0.0, s_end, n_steps + 1)
    mids = nodes[:-1] + 0.5 * h
    f_nodes = np.asarray(fam.schedule.value(nodes), dtype=float)
    f_mids = np.asarray(fam.schedule.value(mids), dtype=float)
    y0 = np.asarray(psi0, dtype=complex).reshape(-1, 1)
    out = _kernels.rk4_fixed(fam.H_I, fam.difference, float(tau), y0, f_nodes, f_mids, h)
    return out[-1, :, 0]
