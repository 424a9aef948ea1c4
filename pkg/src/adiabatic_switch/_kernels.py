"""Compiled integration kernels for i psi' = tau (H_I + f(s) D) psi.

Three kernels share the same right-hand side:

* ``dop853_adaptive`` -- the embedded Dormand-Prince 8(5,3) pair with local
  error control, in double precision (coefficients from SciPy).  Its
  numerical dissipation per unit run time is far below that of the 5(4)
  pair at the same tolerance, which keeps the norm drift of long runs
  small.  The switching function f is integrated as an extra ODE component
  from its closed-form derivative, so the stepper never calls back into
  Python.
* ``rk4_fixed`` -- classical fourth-order Runge-Kutta on a uniform grid with
  f supplied at the step nodes and midpoints; used as an independent
  reference.
* ``dopri5_dd`` -- the Dormand-Prince stages on a uniform grid in
  double-double arithmetic (about 32 significant digits), including the
  bump integrand exp(-1/(s(1-s))).  Roundoff then sits far below the
  adiabatic transition amplitudes that double precision cannot resolve.

State arrays are complex (d, m); the double-double state is stored as a
real array of shape (4, d, m) holding (re_hi, re_lo, im_hi, im_lo).
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop853

# Dormand-Prince 5(4) tableau (exact rationals, then split to hi/lo doubles)
_A_FRAC = [
    [],
    [Fraction(1, 5)],
    [Fraction(3, 40), Fraction(9, 40)],
    [Fraction(44, 45), Fraction(-56, 15), Fraction(32, 9)],
    [Fraction(19372, 6561), Fraction(-25360, 2187), Fraction(64448, 6561), Fraction(-212, 729)],
    [Fraction(9017, 3168), Fraction(-355, 33), Fraction(46732, 5247), Fraction(49, 176),
     Fraction(-5103, 18656)],
    [Fraction(35, 384), Fraction(0), Fraction(500, 1113), Fraction(125, 192),
     Fraction(-2187, 6784), Fraction(11, 84)],
]
_E_FRAC = [Fraction(71, 57600), Fraction(0), Fraction(-71, 16695), Fraction(71, 1920),
           Fraction(-17253, 339200), Fraction(22, 525), Fraction(-1, 40)]
_C_FRAC = [Fraction(0), Fraction(1, 5), Fraction(3, 10), Fraction(4, 5), Fraction(8, 9),
           Fraction(1), Fraction(1)]


def _split(fr: Fraction):
    hi = float(fr)
    lo = float(fr - Fraction(hi))
    return hi, lo


DP_A = np.zeros((7, 7))
DP_A_LO = np.zeros((7, 7))
for _i, _row in enumerate(_A_FRAC):
    for _j, _v in enumerate(_row):
        DP_A[_i, _j], DP_A_LO[_i, _j] = _split(_v)
DP_E = np.array([float(v) for v in _E_FRAC])
DP_C = np.array([float(v) for v in _C_FRAC])
# stage abscissae as (numerator, denominator) for exact node placement
DP_C_NUM = np.array([v.numerator for v in _C_FRAC], dtype=np.int64)
DP_C_DEN = np.array([v.denominator for v in _C_FRAC], dtype=np.int64)

_NS = _dop853.N_STAGES
D8_A = np.ascontiguousarray(_dop853.A[:_NS, :_NS])
D8_B = np.ascontiguousarray(_dop853.B)
D8_C = np.ascontiguousarray(_dop853.C[:_NS])
D8_E3 = np.ascontiguousarray(_dop853.E3)
D8_E5 = np.ascontiguousarray(_dop853.E5)

# status codes returned by the adaptive kernel
OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS = 2


@njit(cache=True, nogil=True)
def _bump_rate(s, beta):
    if s <= 0.0 or s >= 1.0:
        return 0.0
    return beta * np.exp(-1.0 / (s * (1.0 - s)))


@njit(cache=True, nogil=True)
def _apply(HI, D, f, tau, y, out):
    """out = -i tau (HI + f D) y."""
    d, m = y.shape
    for a in range(d):
        for b in range(m):
            acc = 0j
            for c in range(d):
                acc += (HI[a, c] + f * D[a, c]) * y[c, b]
            out[a, b] = -1j * tau * acc


@njit(cache=True, nogil=True)
def dop853_adaptive(HI, D, tau, beta, f0, y0, s_out, rtol, atol, h_min, max_steps):
    """Adaptive DOP853 from s=0 to each ``s_out`` (ascending, <= 1).

    Returns (states, f_values, n_accepted, n_rejected, status).
    """
    d, m = y0.shape
    ns = D8_B.shape[0]
    nout = s_out.shape[0]
    Y = np.zeros((nout, d, m), dtype=np.complex128)
    F = np.zeros(nout)
    y = y0.copy()
    f = f0
    s = 0.0
    K = np.zeros((ns + 1, d, m), dtype=np.complex128)
    kf = np.zeros(ns + 1)
    tmp = np.empty_like(y)
    ynew = np.empty_like(y)
    h = 0.1 / max(tau, 1.0)
    _apply(HI, D, f, tau, y, K[0])
    kf[0] = _bump_rate(s, beta)
    n_acc = 0
    n_rej = 0
    io = 0
    ncomp = d * m + 1
    while io < nout and s_out[io] <= s:
        Y[io] = y
        F[io] = f
        io += 1
    while io < nout:
        if n_acc + n_rej >= max_steps:
            return Y, F, n_acc, n_rej, MAX_STEPS
        target = s_out[io]
        hit = False
        if s + h >= target:
            h = target - s
            hit = True
        for i in range(1, ns):
            for a in range(d):
                for b in range(m):
                    acc = y[a, b]
                    for j in range(i):
                        acc += h * D8_A[i, j] * K[j, a, b]
                    tmp[a, b] = acc
            ft = f
            for j in range(i):
                ft += h * D8_A[i, j] * kf[j]
            _apply(HI, D, ft, tau, tmp, K[i])
            kf[i] = _bump_rate(s + D8_C[i] * h, beta)
        for a in range(d):
            for b in range(m):
                acc = y[a, b]
                for j in range(ns):
                    acc += h * D8_B[j] * K[j, a, b]
                ynew[a, b] = acc
        fnew = f
        for j in range(ns):
            fnew += h * D8_B[j] * kf[j]
        _apply(HI, D, fnew, tau, ynew, K[ns])
        kf[ns] = _bump_rate(s + h, beta)
        e5 = 0.0
        e3 = 0.0
        for a in range(d):
            for b in range(m):
                sc = atol + rtol * max(abs(y[a, b]), abs(ynew[a, b]))
                r5 = 0j
                r3 = 0j
                for j in range(ns + 1):
                    r5 += D8_E5[j] * K[j, a, b]
                    r3 += D8_E3[j] * K[j, a, b]
                e5 += abs(r5 / sc) ** 2
                e3 += abs(r3 / sc) ** 2
        sc = atol + rtol * max(abs(f), abs(fnew))
        r5 = 0.0
        r3 = 0.0
        for j in range(ns + 1):
            r5 += D8_E5[j] * kf[j]
            r3 += D8_E3[j] * kf[j]
        e5 += (r5 / sc) ** 2
        e3 += (r3 / sc) ** 2
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = abs(h) * e5 / np.sqrt((e5 + 0.01 * e3) * ncomp)
        if err <= 1.0:
            s = target if hit else s + h
            y[:, :] = ynew
            f = fnew
            K[0] = K[ns]
            kf[0] = kf[ns]
            n_acc += 1
            while io < nout and s_out[io] <= s:
                Y[io] = y
                F[io] = f
                io += 1
            fac = 0.9 * err ** (-1.0 / 8.0) if err > 0.0 else 10.0
            h *= min(10.0, max(0.2, fac))
        else:
            n_rej += 1
            h *= max(0.2, 0.9 * err ** (-1.0 / 8.0))
        if h < h_min and io < nout:
            return Y, F, n_acc, n_rej, STEP_UNDERFLOW
    return Y, F, n_acc, n_rej, OK


@njit(cache=True, nogil=True)
def rk4_fixed(HI, D, tau, y0, f_nodes, f_mids, h):
    """Classical RK4 on a uniform grid; returns the state at every node."""
    n = f_mids.shape[0]
    d, m = y0.shape
    out = np.zeros((n + 1, d, m), dtype=np.complex128)
    y = y0.copy()
    out[0] = y
    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    for i in range(n):
        _apply(HI, D, f_nodes[i], tau, y, k1)
        _apply(HI, D, f_mids[i], tau, y + 0.5 * h * k1, k2)
        _apply(HI, D, f_mids[i], tau, y + 0.5 * h * k2, k3)
        _apply(HI, D, f_nodes[i + 1], tau, y + h * k3, k4)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y
    return out


# --------------------------------------------------------------------------
# double-double arithmetic
# --------------------------------------------------------------------------

_SPLITTER = 134217729.0  # 2^27 + 1
_LN2_HI = 0.6931471805599453
_LN2_LO = 2.3190468138462996e-17


@njit(cache=True, nogil=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True, nogil=True, inline="always")
def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


@njit(cache=True, nogil=True, inline="always")
def _split_dekker(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


@njit(cache=True, nogil=True, inline="always")
def _two_prod(a, b):
    p = a * b
    ah, al = _split_dekker(a)
    bh, bl = _split_dekker(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True, nogil=True, inline="always")
def dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    t, f = _two_sum(al, bl)
    e += t
    s, e = _quick_two_sum(s, e)
    e += f
    return _quick_two_sum(s, e)


@njit(cache=True, nogil=True, inline="always")
def dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    e += ah * bl + al * bh
    return _quick_two_sum(p, e)


@njit(cache=True, nogil=True, inline="always")
def dd_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = dd_mul(q1, 0.0, bh, bl)
    rh, rl = dd_add(ah, al, -ph, -pl)
    q2 = rh / bh
    ph, pl = dd_mul(q2, 0.0, bh, bl)
    rh, rl = dd_add(rh, rl, -ph, -pl)
    q3 = rh / bh
    q1, q2 = _quick_two_sum(q1, q2)
    return dd_add(q1, q2, q3, 0.0)


@njit(cache=True, nogil=True)
def dd_exp(ah, al):
    """exp of a double-double; underflows to zero below about -708."""
    if ah < -708.0:
        return 0.0, 0.0
    k = np.floor(ah / _LN2_HI + 0.5)
    ph, pl = dd_mul(k, 0.0, _LN2_HI, _LN2_LO)
    rh, rl = dd_add(ah, al, -ph, -pl)
    # r in [-ln2/2, ln2/2]; scale by 2^-10 and use Taylor, then square back
    rh *= 1.0 / 1024.0
    rl *= 1.0 / 1024.0
    sh, sl = 1.0, 0.0
    th, tl = 1.0, 0.0
    for n in range(1, 14):
        th, tl = dd_mul(th, tl, rh, rl)
        th, tl = dd_div(th, tl, float(n), 0.0)
        sh, sl = dd_add(sh, sl, th, tl)
    for _ in range(10):
        sh, sl = dd_mul(sh, sl, sh, sl)
    scale = 2.0 ** k
    return sh * scale, sl * scale


@njit(cache=True, nogil=True)
def _dd_bump_rate(sh, sl, bh, bl):
    """beta * exp(-1/(s(1-s))) in double-double."""
    if sh <= 0.0 or sh >= 1.0:
        return 0.0, 0.0
    oh, ol = dd_add(1.0, 0.0, -sh, -sl)
    wh, wl = dd_mul(sh, sl, oh, ol)
    ih, il = dd_div(-1.0, 0.0, wh, wl)
    eh, el = dd_exp(ih, il)
    return dd_mul(bh, bl, eh, el)


@njit(cache=True, nogil=True)
def _dd_apply(HI, D, fh, fl, tau, Y, out):
    """out = -i tau (HI + f D) Y for a double-double complex state."""
    _, d, m = Y.shape
    for a in range(d):
        for b in range(m):
            rh, rl, ih, il = 0.0, 0.0, 0.0, 0.0
            for c in range(d):
                # matrix entry M = HI + f D in double-double
                mrh, mrl = dd_mul(fh, fl, D[a, c].real, 0.0)
                mrh, mrl = dd_add(mrh, mrl, HI[a, c].real, 0.0)
                mih, mil = dd_mul(fh, fl, D[a, c].imag, 0.0)
                mih, mil = dd_add(mih, mil, HI[a, c].imag, 0.0)
                yrh, yrl, yih, yil = Y[0, c, b], Y[1, c, b], Y[2, c, b], Y[3, c, b]
                # (mr + i mi)(yr + i yi)
                t1h, t1l = dd_mul(mrh, mrl, yrh, yrl)
                t2h, t2l = dd_mul(mih, mil, yih, yil)
                t3h, t3l = dd_mul(mrh, mrl, yih, yil)
                t4h, t4l = dd_mul(mih, mil, yrh, yrl)
                rh, rl = dd_add(rh, rl, t1h, t1l)
                rh, rl = dd_add(rh, rl, -t2h, -t2l)
                ih, il = dd_add(ih, il, t3h, t3l)
                ih, il = dd_add(ih, il, t4h, t4l)
            # -i tau (r + i im) = tau im - i tau r
            out[0, a, b], out[1, a, b] = dd_mul(tau, 0.0, ih, il)
            nh, nl = dd_mul(tau, 0.0, rh, rl)
            out[2, a, b], out[3, a, b] = -nh, -nl


@njit(cache=True, nogil=True)
def _dd_step(HI, D, tau, bh, bl, s_num, n_steps, hh, hl, fh, fl, Y, K, kf, tmp, out):
    """One Dormand-Prince step of length h from s = s_num / n_steps.

    ``hh, hl`` is the step length; stage abscissae are s + c_i h.  The
    5th-order result goes to ``out``; returns the updated f.
    """
    _, d, m = Y.shape
    # s in double-double
    sh, sl = dd_div(float(s_num), 0.0, float(n_steps), 0.0)
    _dd_apply(HI, D, fh, fl, tau, Y, K[0])
    kf[0, 0], kf[0, 1] = _dd_bump_rate(sh, sl, bh, bl)
    gh, gl = fh, fl
    for i in range(1, 7):
        for comp in range(2):
            for a in range(d):
                for b in range(m):
                    ah, al = Y[2 * comp, a, b], Y[2 * comp + 1, a, b]
                    for j in range(i):
                        if DP_A[i, j] != 0.0:
                            ch, cl = dd_mul(hh, hl, DP_A[i, j], DP_A_LO[i, j])
                            ch, cl = dd_mul(ch, cl, K[j, 2 * comp, a, b], K[j, 2 * comp + 1, a, b])
                            ah, al = dd_add(ah, al, ch, cl)
                    tmp[2 * comp, a, b] = ah
                    tmp[2 * comp + 1, a, b] = al
        gh, gl = fh, fl
        for j in range(i):
            if DP_A[i, j] != 0.0:
                ch, cl = dd_mul(hh, hl, DP_A[i, j], DP_A_LO[i, j])
                ch, cl = dd_mul(ch, cl, kf[j, 0], kf[j, 1])
                gh, gl = dd_add(gh, gl, ch, cl)
        if i < 6:
            _dd_apply(HI, D, gh, gl, tau, tmp, K[i])
            # stage abscissa s + c_i h
            ch, cl = dd_div(float(DP_C_NUM[i]), 0.0, float(DP_C_DEN[i]), 0.0)
            ch, cl = dd_mul(ch, cl, hh, hl)
            ch, cl = dd_add(ch, cl, sh, sl)
            kf[i, 0], kf[i, 1] = _dd_bump_rate(ch, cl, bh, bl)
    out[:, :, :] = tmp
    return gh, gl


@njit(cache=True, nogil=True)
def dopri5_dd(HI, D, tau, beta_hi, beta_lo, y0, n_steps, sample_steps, sample_frac):
    """Uniform-step double-double integration over [0, 1] with h = 1/n_steps.

    Sample k lies at (sample_steps[k] + sample_frac[k]) / n_steps with
    0 <= sample_frac < 1 (``sample_steps`` ascending).  Off-grid samples are
    reached by a branch step that does not perturb the main trajectory.

    Returns (states (nout, 4, d, m), f values (nout, 2)).
    """
    _, d, m = y0.shape
    nout = sample_steps.shape[0]
    Yout = np.zeros((nout, 4, d, m))
    Fout = np.zeros((nout, 2))
    Y = y0.copy()
    nxt = np.empty_like(Y)
    branch = np.empty_like(Y)
    K = np.zeros((7, 4, d, m))
    kf = np.zeros((7, 2))
    tmp = np.empty_like(Y)
    hh, hl = dd_div(1.0, 0.0, float(n_steps), 0.0)
    fh, fl = 0.0, 0.0
    io = 0
    for step in range(n_steps + 1):
        while io < nout and sample_steps[io] == step:
            if sample_frac[io] == 0.0:
                Yout[io] = Y
                Fout[io, 0], Fout[io, 1] = fh, fl
            else:
                bh_, bl_ = dd_mul(hh, hl, sample_frac[io], 0.0)
                gh, gl = _dd_step(HI, D, tau, beta_hi, beta_lo, step, n_steps, bh_, bl_,
                                  fh, fl, Y, K, kf, tmp, branch)
                Yout[io] = branch
                Fout[io, 0], Fout[io, 1] = gh, gl
            io += 1
        if step == n_steps or io >= nout:
            break
        fh, fl = _dd_step(HI, D, tau, beta_hi, beta_lo, step, n_steps, hh, hl,
                          fh, fl, Y, K, kf, tmp, nxt)
        Y[:, :, :] = nxt
    return Yout, Fout
