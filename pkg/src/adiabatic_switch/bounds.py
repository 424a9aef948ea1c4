"""Explicit bounds for the superadiabatic expansion and the run-time law.

All quantities are evaluated through their logarithms;
(k+3n)^{2 alpha (k+3n)} leaves double range already for moderate orders.

Notation: with y = (tau g^2)^{1/3} / (2 C R) and x = y^{1/(2 alpha)} / e,
the remainder estimate, viewed as a function of M = 3N + 1, is convex in M
and minimal at M = x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import BoundRangeError, DomainError, InfeasibleTruncationError, ValidationError

LOG_DOUBLE_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class BoundParams:
    """Gevrey constants (C, R, alpha) and the minimal gap g."""

    C: float
    R: float
    alpha: float
    g: float

    def __post_init__(self):
        if not (self.C >= 1.0 and self.R >= 1.0):
            raise ValidationError(f"C and R must be >= 1 (got C={self.C}, R={self.R})")
        if not self.alpha > 1.0:
            raise ValidationError(f"alpha must exceed 1 (got {self.alpha})")
        if not 0.0 < self.g <= 1.0:
            raise ValidationError(f"g must lie in (0, 1] (got {self.g})")

    @property
    def log_2CR(self) -> float:
        return math.log(2.0 * self.C * self.R)


def _check_log(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise BoundRangeError(f"{what} is not representable even in log-space")
    return value


def log_L_bound(n: int, k: int, p: BoundParams) -> float:
    """log of (10n+0.3)^{-2} g^{-2n-k} (2 C R (k+3n)^{2 alpha})^{k+3n}."""
    if n < 0 or k < 0:
        raise ValidationError("n and k must be non-negative")
    m = k + 3 * n
    val = -2.0 * math.log(10.0 * n + 0.3) - (2 * n + k) * math.log(p.g)
    if m > 0:
        val += m * (p.log_2CR + 2.0 * p.alpha * math.log(m))
    return _check_log(val, f"L({n}, {k})")


def L_bound(n: int, k: int, p: BoundParams) -> float:
    """L(n, k); returns inf when the value exceeds double range."""
    lv = log_L_bound(n, k, p)
    return math.inf if lv > LOG_DOUBLE_MAX else math.exp(lv)


def log_remainder_bound(N: int, tau: float, p: BoundParams, form: str = "scaled") -> float:
    """log of the remainder estimate for truncation order N.

    ``form="scaled"``: (tau/g)^{1/3} (2CR(3N+1)^{2a} / (tau g^2)^{1/3})^{3N+1};
    ``form="direct"``: tau^{-N} g^{-2N-1} (2CR(3N+1)^{2a})^{3N+1}.
    The two are algebraically identical.
    """
    if N < 0:
        raise ValidationError("N must be non-negative")
    if not tau > 0:
        raise ValidationError("tau must be positive")
    M = 3 * N + 1
    lt, lg = math.log(tau), math.log(p.g)
    growth = p.log_2CR + 2.0 * p.alpha * math.log(M)
    if form == "scaled":
        val = (lt - lg) / 3.0 + M * (growth - (lt + 2.0 * lg) / 3.0)
    elif form == "direct":
        val = -N * lt - (2 * N + 1) * lg + M * growth
    else:
        raise ValueError(f"unknown form {form!r}")
    return _check_log(val, f"remainder(N={N})")


def remainder_bound(N: int, tau: float, p: BoundParams) -> float:
    lv = log_remainder_bound(N, tau, p)
    return math.inf if lv > LOG_DOUBLE_MAX else math.exp(lv)


def continuous_optimum(tau: float, p: BoundParams) -> float:
    """x = ((tau g^2)^{1/3} / (2CR))^{1/(2 alpha)} / e, the real minimizer of M."""
    log_y = (math.log(tau) + 2.0 * math.log(p.g)) / 3.0 - p.log_2CR
    return math.exp(log_y / (2.0 * p.alpha) - 1.0)


def log_closed_form_remainder(tau: float, p: BoundParams) -> float:
    """log of (tau/g)^{1/3} exp(-2 alpha x), the remainder evaluated at M = x."""
    x = continuous_optimum(tau, p)
    return (math.log(tau) - math.log(p.g)) / 3.0 - 2.0 * p.alpha * x


@dataclass(frozen=True)
class TruncationPlan:
    N_opt: int
    remainder_estimate: float
    partial_sum_estimate: float
    tau: float
    x: float = math.nan
    log_remainder: float = math.nan

    def __post_init__(self):
        if self.N_opt < 0:
            raise ValidationError("N_opt must be non-negative")


def optimal_truncation(tau: float, p: BoundParams) -> TruncationPlan:
    """Integer truncation order minimizing the remainder estimate.

    The minimizer over real M = 3N+1 is x; by convexity the integer optimum
    is floor((x-1)/3) or ceil((x-1)/3), decided by direct comparison (the
    smaller N wins exact ties).
    """
    if not tau > 0:
        raise ValidationError("tau must be positive")
    log_y = (math.log(tau) + 2.0 * math.log(p.g)) / 3.0 - p.log_2CR
    if log_y < 2.0 * p.alpha:
        raise InfeasibleTruncationError(
            f"(tau g^2)^(1/3) / (2CR) = {math.exp(log_y):.4g} is below e^(2 alpha) = "
            f"{math.exp(2 * p.alpha):.4g}; tau is too small for this gap")
    x = continuous_optimum(tau, p)
    n_star = (x - 1.0) / 3.0
    candidates = sorted({max(0, math.floor(n_star)), max(0, math.ceil(n_star))})
    logs = [log_remainder_bound(n, tau, p) for n in candidates]
    best = int(np.argmin(logs))
    N_opt = candidates[best]
    partial = partial_sum_bound_value(N_opt, tau, p)
    rem = math.inf if logs[best] > LOG_DOUBLE_MAX else math.exp(logs[best])
    return TruncationPlan(N_opt=N_opt, remainder_estimate=rem, partial_sum_estimate=partial,
                          tau=float(tau), x=x, log_remainder=logs[best])


def brute_force_truncation(tau: float, p: BoundParams, n_max: int = 60) -> int:
    """argmin of the remainder estimate over N = 0..n_max (first minimum)."""
    logs = [log_remainder_bound(n, tau, p) for n in range(n_max + 1)]
    return int(np.argmin(logs))


def tau_threshold(g: float, alpha: float, K: float = 4.0) -> float:
    """K g^{-2} |ln g|^{6 alpha}.

    The derivation of the run-time law uses K > 2; the statement of the
    theorem only asks for K > 0, so any positive K is accepted.
    """
    if not 0.0 < g < 1.0:
        raise DomainError(f"g must lie in (0, 1) (got {g})")
    if not K > 0:
        raise DomainError(f"K must be positive (got {K})")
    if not alpha >= 1.0:
        raise DomainError(f"alpha must be >= 1 (got {alpha})")
    return float(K * g ** -2 * abs(math.log(g)) ** (6.0 * alpha))


def log_partial_sum_terms(N: int, tau: float, p: BoundParams) -> np.ndarray:
    """log of (tau g^2)^{-j} (2CR(3j)^{2 alpha})^{3j}, j = 1..N."""
    lt = math.log(tau) + 2.0 * math.log(p.g)
    j = np.arange(1, N + 1, dtype=float)
    return -j * lt + 3.0 * j * (p.log_2CR + 2.0 * p.alpha * np.log(3.0 * j))


def partial_sum_bound_value(N: int, tau: float, p: BoundParams) -> float:
    if N == 0:
        return 0.0
    lv = float(logsumexp(log_partial_sum_terms(N, tau, p)))
    return math.inf if lv > LOG_DOUBLE_MAX else math.exp(lv)


@dataclass(frozen=True)
class PartialSumEstimate:
    direct: float
    closing_bound: float
    terms: tuple


def partial_sum_bound(plan: TruncationPlan, p: BoundParams, K: float = 4.0) -> PartialSumEstimate:
    """Direct sum of the first N_opt term bounds and the two-piece closing bound

    2 (K^{-1} (2CR)^{3/2} (tau g^2)^{-1/2} + K^{-sqrt(N_opt)}).
    """
    if not K > 0:
        raise DomainError("K must be positive")
    logs = log_partial_sum_terms(plan.N_opt, plan.tau, p)
    terms = tuple(math.inf if v > LOG_DOUBLE_MAX else math.exp(v) for v in logs)
    direct = partial_sum_bound_value(plan.N_opt, plan.tau, p)
    tg2 = plan.tau * p.g ** 2
    closing = 2.0 * ((2.0 * p.C * p.R) ** 1.5 / (K * math.sqrt(tg2)) + K ** -math.sqrt(plan.N_opt))
    return PartialSumEstimate(direct=direct, closing_bound=closing, terms=terms)


def assembled_bound(tau: float, p: BoundParams) -> float:
    """Remainder at N_opt plus the direct partial sum (the assembled error estimate).

    Returns inf when the truncation precondition fails.
    """
    try:
        plan = optimal_truncation(tau, p)
    except InfeasibleTruncationError:
        return math.inf
    return plan.remainder_estimate + plan.partial_sum_estimate
