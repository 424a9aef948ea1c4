"""Gevrey-class switching functions.

The bump schedule is

    f(t) = beta * int_{-inf}^t exp(-1/(s(1-s))) ds      (0 < s < 1)

normalized so that f(1) = 1.  Its derivatives are evaluated exactly from
the closed form of the integrand: with w(s) = s(1-s),

    d^m/ds^m exp(-1/w) = P_m(s) * w^(-2m) * exp(-1/w),
    P_{m+1} = P_m' w^2 + P_m w' (1 - 2 m w),     P_0 = 1,

where every P_m has integer coefficients.  The polynomial is evaluated in
exact integer arithmetic at the (binary) input value and only the final
result is rounded, so high orders stay accurate near the flat endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, GevreyFitError, UnsupportedOrderError

MAX_ORDER = 30

_GL_ORDER = 20
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


# --------------------------------------------------------------------------
# exact derivative polynomials
# --------------------------------------------------------------------------

def _padd(a, b):
    n = max(len(a), len(b))
    out = [0] * n
    for i, c in enumerate(a):
        out[i] += c
    for i, c in enumerate(b):
        out[i] += c
    return out


def _pmul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _pder(a):
    return [i * c for i, c in enumerate(a)][1:] or [0]


_W = [0, 1, -1]          # s - s^2
_W2 = _pmul(_W, _W)
_DW = [1, -2]            # 1 - 2s


@lru_cache(maxsize=None)
def bump_polynomial(m: int) -> tuple[int, ...]:
    """Integer coefficients (ascending powers of s) of P_m."""
    if m < 0:
        raise ValueError("m must be non-negative")
    if m == 0:
        return (1,)
    p = list(bump_polynomial(m - 1))
    k = m - 1
    term1 = _pmul(_pder(p), _W2)
    term2 = _pmul(_pmul(p, _DW), [1, -2 * k, 2 * k])   # 1 - 2k(s - s^2)
    out = _padd(term1, term2)
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return tuple(out)


def _poly_at_exact(coeffs, s: float) -> tuple[int, int]:
    """Return (numerator, denominator) of P(s) for a binary float s."""
    p, q = float(s).as_integer_ratio()
    deg = len(coeffs) - 1
    acc = coeffs[-1]
    qpow = 1
    for c in reversed(coeffs[:-1]):
        qpow *= q
        acc = acc * p + c * qpow
    return acc, q ** deg


def _bump_kernel_derivative(m: int, s: float) -> float:
    """d^m/ds^m exp(-1/(s(1-s))) at a scalar s in (0, 1)."""
    num, den = _poly_at_exact(bump_polynomial(m), s)
    if num == 0:
        return 0.0
    w = s * (1.0 - s)
    log_mag = math.log(abs(num)) - math.log(den) - 2 * m * math.log(w) - 1.0 / w
    if log_mag < -745.0:
        return 0.0
    return math.exp(log_mag) if num > 0 else -math.exp(log_mag)


# --------------------------------------------------------------------------
# schedules
# --------------------------------------------------------------------------

def _bump_integrand(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    out[inside] = np.exp(-1.0 / (si * (1.0 - si)))
    return out


def _composite_gl(n_panels: int) -> np.ndarray:
    """Cumulative integrals of exp(-1/w) at the panel edges i/n_panels."""
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    panel = half * (_bump_integrand(nodes) @ _GL_W)
    return np.concatenate([[0.0], np.cumsum(panel)])


@dataclass(frozen=True, eq=False)
class Schedule:
    """A switching function with exact derivative access.

    Subclasses implement ``value`` and ``derivative``; ``beta`` is the rate
    normalization used by the propagator kernels (zero for schedules that
    never move).
    """

    name: str
    beta: float
    alpha: float
    max_order: int = MAX_ORDER

    def value(self, s):
        raise NotImplementedError

    def derivative(self, s, k: int):
        raise NotImplementedError

    def initial_value(self) -> float:
        return float(self.value(0.0))

    def __call__(self, s):
        return self.value(s)


@dataclass(frozen=True, eq=False)
class BumpSchedule(Schedule):
    """Integrated bump exp(-1/(s(1-s))), normalized to switch from 0 to 1."""

    cumulative: np.ndarray = field(default=None, repr=False)

    @property
    def n_panels(self) -> int:
        return len(self.cumulative) - 1

    def value(self, s):
        s_arr = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s_arr).ravel()
        out = np.empty_like(flat)
        out[flat <= 0.0] = 0.0
        out[flat >= 1.0] = 1.0
        inside = (flat > 0.0) & (flat < 1.0)
        if np.any(inside):
            si = flat[inside]
            n = self.n_panels
            idx = np.minimum((si * n).astype(int), n - 1)
            a = idx / n
            half = 0.5 * (si - a)
            nodes = (0.5 * (si + a))[:, None] + half[:, None] * _GL_X[None, :]
            partial = half * (_bump_integrand(nodes) @ _GL_W)
            out[inside] = self.beta * (self.cumulative[idx] + partial)
        if s_arr.ndim == 0:
            return float(out[0])
        return out.reshape(s_arr.shape)

    def derivative(self, s, k: int):
        """k-th derivative; k = 0 returns the value."""
        if k < 0:
            raise ValueError("derivative order must be non-negative")
        if k > self.max_order:
            raise UnsupportedOrderError(
                f"order {k} exceeds supported maximum {self.max_order}")
        if k == 0:
            return self.value(s)
        s_arr = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s_arr).ravel()
        out = np.zeros_like(flat)
        for i, si in enumerate(flat):
            if 0.0 < si < 1.0:
                out[i] = self.beta * _bump_kernel_derivative(k - 1, float(si))
        if s_arr.ndim == 0:
            return float(out[0])
        return out.reshape(s_arr.shape)


@dataclass(frozen=True, eq=False)
class ConstantSchedule(Schedule):
    """f(s) = level for all s; every derivative vanishes."""

    level: float = 0.0

    def value(self, s):
        s_arr = np.asarray(s, dtype=float)
        if s_arr.ndim == 0:
            return float(self.level)
        return np.full(s_arr.shape, float(self.level))

    def derivative(self, s, k: int):
        if k > self.max_order:
            raise UnsupportedOrderError(
                f"order {k} exceeds supported maximum {self.max_order}")
        if k == 0:
            return self.value(s)
        s_arr = np.asarray(s, dtype=float)
        return 0.0 if s_arr.ndim == 0 else np.zeros(s_arr.shape)


def build_bump_schedule(tol: float = 1e-12, max_panels: int = 1 << 14) -> BumpSchedule:
    """Construct the normalized bump schedule.

    The normalization integral is computed by composite Gauss-Legendre
    quadrature, doubling the panel count until two successive resolutions
    agree to ``tol`` (absolute).
    """
    n = 16
    prev = _composite_gl(n)
    while True:
        n *= 2
        cur = _composite_gl(n)
        if abs(cur[-1] - prev[-1]) <= tol:
            break
        if n >= max_panels:
            raise ConfigurationError(
                f"bump normalization did not converge to {tol} with {n} panels")
        prev = cur
    # finer panels keep the in-panel partial integrals at full precision
    n = max(n, 256)
    cum = _composite_gl(n)
    return BumpSchedule(name="bump", beta=1.0 / cum[-1], alpha=2.0, cumulative=cum)


def constant_schedule(level: float = 0.0) -> ConstantSchedule:
    return ConstantSchedule(name="constant", beta=0.0, alpha=1.0, level=level)


def schedule_derivative(sched: Schedule, s: float, k: int) -> float:
    """f^(k)(s) for a scalar s (k = 0 gives f itself)."""
    return float(sched.derivative(float(s), int(k)))


SCHEDULES = {"bump": build_bump_schedule, "constant": constant_schedule}


def schedule_by_name(name: str) -> Schedule:
    try:
        return SCHEDULES[name]()
    except KeyError:
        raise ConfigurationError(f"unknown schedule {name!r}") from None


# --------------------------------------------------------------------------
# Gevrey constants
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GevreyFit:
    """Constants certifying max_s |d^k| <= C R^k k^(alpha k) for k <= k_max."""

    C: float
    R: float
    alpha: float
    k_max: int
    scale: float = 1.0
    max_derivatives: tuple = ()

    def bound(self, k: int) -> float:
        return self.C * self.R ** k * float(k) ** (self.alpha * k)


def derivative_maxima(sched: Schedule, k_max: int, n_samples: int = 2001,
                      scale: float = 1.0) -> np.ndarray:
    """max over a uniform grid of scale*|f^(k)| for k = 1..k_max."""
    grid = np.linspace(0.0, 1.0, n_samples)
    return np.array([scale * np.max(np.abs(sched.derivative(grid, k)))
                     for k in range(1, k_max + 1)])


def fit_gevrey_constants(sched: Schedule, alpha: float, k_max: int, *,
                         scale: float = 1.0, n_samples: int = 2001) -> GevreyFit:
    """Search for the feasible (C, R) with the smallest product C*R.

    ``scale`` multiplies the derivative magnitudes, e.g. ||H_F - H_I|| when
    certifying the Hamiltonian family rather than the bare schedule.
    C ranges over powers of two up to 2^20 and R over 200 log-spaced values
    in [1, 1000].
    """
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    if n_samples < 1000:
        raise ValueError("at least 1000 sample points are required")
    maxima = derivative_maxima(sched, k_max, n_samples, scale)
    ks = np.arange(1, k_max + 1, dtype=float)
    with np.errstate(divide="ignore"):
        log_m = np.log(maxima)
    Cs = 2.0 ** np.arange(21)
    Rs = np.logspace(0.0, 3.0, 200)
    # required log C for each R: max_k [log M_k - k log R - alpha k log k]
    need = log_m[None, :] - ks[None, :] * np.log(Rs)[:, None] - alpha * ks * np.log(ks)
    need_c = need.max(axis=1)
    feasible = np.log(Cs)[None, :] >= need_c[:, None] - 1e-12
    if not feasible.any():
        raise GevreyFitError(
            f"no (C, R) on the search grid certifies alpha={alpha} up to k={k_max}")
    ri, ci = np.nonzero(feasible)
    best = np.argmin(Cs[ci] * Rs[ri])
    C, R = float(Cs[ci[best]]), float(Rs[ri[best]])
    bounds = C * R ** ks * ks ** (alpha * ks)
    if np.any(maxima > bounds):
        raise GevreyFitError("post-fit check failed")  # pragma: no cover
    return GevreyFit(C=C, R=R, alpha=float(alpha), k_max=int(k_max), scale=float(scale),
                     max_derivatives=tuple(float(m) for m in maxima))
