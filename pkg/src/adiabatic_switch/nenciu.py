"""Superadiabatic expansion P_tau ~ sum_j tau^{-j} B_j.

The coefficients solve the hierarchy

    i dB_j/ds = [H, B_{j+1}],        B_j = sum_{m=0}^{j} B_m B_{j-m},

with B_0 = P.  The commutator equation fixes the blocks of B_{j+1} that are
off-diagonal with respect to P, Q = 1 - P; the quadratic identity fixes the
diagonal blocks:  P B_j P = -P S_j P,  Q B_j Q = Q S_j Q with
S_j = sum_{m=1}^{j-1} B_m B_{j-m}.

Derivatives with respect to s are propagated as Taylor jets: at a point s
the Taylor coefficients of H (exact, from the schedule's derivative oracle)
feed order-by-order versions of both relations, giving P, B_1, ... and
their s-derivatives to working precision at every evaluation point.  B_j
needs N + 1 - j orders, so B_N comes with its first derivative.  Chebyshev
spectral differentiation on the collocation grid is kept as an
independent cross-check and resolution diagnostic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import chebyshev
from .errors import ResolutionWarning, ValidationError
from .hamiltonian import (
    BandPath,
    HamiltonianFamily,
    SpectralFrame,
    clusters,
    frame_from_matrix,
    resolvent,
    track_band,
)

MAX_EXPANSION_ORDER = 12
DEFAULT_CONTOUR_NODES = 64
RESOLUTION_TOL = 1e-8


def default_grid_size(N: int) -> int:
    return max(65, 4 * N + 33)


def commutator(A, B):
    return A @ B - B @ A


# --------------------------------------------------------------------------
# pointwise building blocks
# --------------------------------------------------------------------------

def solve_commutator_offdiag(frame: SpectralFrame, Y) -> np.ndarray:
    """Block-off-diagonal X with [H, X] = i Y on the off-diagonal blocks.

    In the eigenbasis X_ab = i Y_ab / (w_a - w_b) whenever exactly one of
    a, b belongs to the band; all other entries vanish.
    """
    Yt = frame.to_eigenbasis(np.asarray(Y, dtype=complex))
    Xt = _offdiag_divide(1j * Yt, frame.energies, frame.band_mask)
    return frame.from_eigenbasis(Xt)


def _offdiag_divide(Z, w, mask):
    """Entries Z_ab / (w_a - w_b) on the band/complement cross blocks."""
    cross = mask[:, None] != mask[None, :]
    denom = w[:, None] - w[None, :]
    out = np.zeros_like(Z)
    out[cross] = Z[cross] / denom[cross]
    return out


def diagonal_blocks_from_S(frame: SpectralFrame, S) -> np.ndarray:
    """-P S P + Q S Q."""
    S = np.asarray(S, dtype=complex)
    P, Q = frame.P, frame.Q
    return -P @ S @ P + Q @ S @ Q


def s_term(terms, j: int) -> np.ndarray:
    """S_j = sum_{m=1}^{j-1} B_m B_{j-m} from a list of matrices B_0..B_{j-1}."""
    d = terms[0].shape[-1]
    S = np.zeros((d, d), dtype=complex)
    for m in range(1, j):
        S += terms[m] @ terms[j - m]
    return S


def contour_map(frame: SpectralFrame, A, nodes: int = DEFAULT_CONTOUR_NODES) -> np.ndarray:
    """(1/2pi) times the counterclockwise integral of R_z A R_z over |z - E| = g/2.

    Periodic trapezoid rule with ``nodes`` points.  With this orientation
    the result equals -i (P A Rt + Rt A P), Rt = Q (H - E)^{-1} Q, so that
    contour_map(frame, [P, Y]) coincides with solve_commutator_offdiag(frame, Y).
    """
    if nodes < 16:
        raise ValueError("at least 16 contour nodes are required")
    A = np.asarray(A, dtype=complex)
    radius = 0.5 * frame.gap
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    acc = np.zeros_like(A)
    for t in theta:
        e = np.exp(1j * t)
        R = resolvent(frame, frame.E + radius * e)
        acc += e * (R @ A @ R)
    return (1j * radius / nodes) * acc


def contour_recursion_term(frame: SpectralFrame, Bdot_prev, S, nodes: int = DEFAULT_CONTOUR_NODES):
    """Contour form: (1/2pi) int R [P, Bdot_{j-1}] R dz + S_j - 2 P S_j P."""
    P = frame.P
    return contour_map(frame, commutator(P, Bdot_prev), nodes) + S - 2.0 * P @ S @ P


def projector_derivative_contour(frame: SpectralFrame, Hdot, nodes: int = DEFAULT_CONTOUR_NODES):
    """dP/ds = -(P Hdot Rt + Rt Hdot P) evaluated through contour_map."""
    return -1j * contour_map(frame, Hdot, nodes)


# --------------------------------------------------------------------------
# Taylor-jet recursion
# --------------------------------------------------------------------------

def _series_jets(H_coeffs, frame: SpectralFrame, N: int) -> np.ndarray:
    """Taylor coefficients of B_0..B_N at one point, in the lab basis.

    ``H_coeffs[a]`` is the a-th Taylor coefficient of H; returns an array
    J[j, k] (zero where order k is not available for B_j, i.e. k > N+1-j).

    The recursion runs in extended precision in the eigenbasis of H(s).
    B_j grows roughly like g^{-2j} times factorial-type factors, so double
    precision would leave algebraic residuals at eps * ||B_N||.  The
    eigenbasis is re-orthonormalized in extended precision, which makes
    every relation hold to extended precision for the Hamiltonian
    V diag(w) V^+ (within double rounding of H(s)).
    """
    K = N + 1
    xdt = np.clongdouble
    V = frame.vectors.astype(xdt)
    I = np.eye(V.shape[0], dtype=xdt)
    V = V @ (1.5 * I - 0.5 * (V.conj().T @ V))      # Newton-Schulz step
    w = frame.energies.astype(np.longdouble)
    mask = frame.band_mask
    d = len(w)
    Vh = V.conj().T
    Ht = [None] + [Vh @ np.asarray(Hc).astype(xdt) @ V for Hc in H_coeffs[1:]]
    pd = mask.astype(np.longdouble)
    qd = 1 - pd

    def diag_part(T):
        return -(pd[:, None] * T * pd[None, :]) + qd[:, None] * T * qd[None, :]

    J = np.zeros((N + 1, K + 1, d, d), dtype=xdt)
    J[0, 0] = np.diag(pd).astype(xdt)
    for k in range(1, K + 1):
        Z = np.zeros((d, d), dtype=xdt)
        for a in range(1, k + 1):
            Z -= commutator(Ht[a], J[0, k - a])
        T = np.zeros((d, d), dtype=xdt)
        for a in range(1, k):
            T += J[0, a] @ J[0, k - a]
        J[0, k] = _offdiag_divide(Z, w, mask) + diag_part(T)
    for j in range(1, N + 1):
        for k in range(0, K - j + 1):
            Z = 1j * (k + 1) * J[j - 1, k + 1]
            for a in range(1, k + 1):
                Z -= commutator(Ht[a], J[j, k - a])
            T = np.zeros((d, d), dtype=xdt)
            for m in range(0, j + 1):
                for a in range(0, k + 1):
                    if (m == 0 and a == 0) or (m == j and a == k):
                        continue
                    T += J[m, a] @ J[j - m, k - a]
            J[j, k] = _offdiag_divide(Z, w, mask) + diag_part(T)
    for j in range(N + 1):
        for k in range(K - j + 1):
            X = V @ J[j, k] @ Vh
            J[j, k] = 0.5 * (X + X.conj().T)
    return J


def _norm(A) -> float:
    """Spectral norm; extended-precision input is rounded to double first."""
    return float(np.linalg.norm(np.asarray(A).astype(complex), 2))


def _norms(stack) -> np.ndarray:
    return np.linalg.norm(np.asarray(stack).astype(complex), 2, axis=(-2, -1))


# --------------------------------------------------------------------------
# the tabulated series
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExpansionSeries:
    """B_j and dB_j/ds for j = 0..N on Chebyshev-Gauss-Lobatto nodes."""

    family: HamiltonianFamily
    N: int
    grid: np.ndarray
    terms: np.ndarray          # (N+1, M, d, d), extended precision
    derivs: np.ndarray         # (N+1, M, d, d), extended precision
    frames: tuple
    tail_ratios: np.ndarray    # per j, Chebyshev coefficient tail / lead
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def M(self) -> int:
        return len(self.grid)

    @property
    def min_gap(self) -> float:
        return float(min(fr.gap for fr in self.frames))

    def B(self, j: int) -> np.ndarray:
        return self.terms[j]

    def Bdot(self, j: int) -> np.ndarray:
        return self.derivs[j]

    def term_norms(self, j: int) -> np.ndarray:
        """Operator norms ||B_j(s_i)|| at the nodes."""
        return _norms(self.terms[j])

    def derivative_norms(self, j: int) -> np.ndarray:
        """Operator norms ||dB_j/ds(s_i)|| at the nodes."""
        return _norms(self.derivs[j])

    def _band_at(self, s: float, H) -> tuple:
        i = int(np.argmin(np.abs(self.grid - np.clip(s, 0.0, 1.0))))
        ref = self.frames[i].P
        energies, vectors = np.linalg.eigh(H)
        best, best_ov = None, -1.0
        for cl in clusters(energies):
            Vc = vectors[:, list(cl)]
            ov = float(np.real(np.trace(ref @ Vc @ Vc.conj().T)))
            if ov > best_ov:
                best, best_ov = cl, ov
        return best

    def frame_at(self, s: float) -> SpectralFrame:
        H = self.family(s)
        return frame_from_matrix(H, s, band=self._band_at(s, H))

    def at(self, s: float):
        """Exact (B_j(s), dB_j/ds(s)) for all j by a fresh jet recursion."""
        s = float(s)
        key = ("at", s)
        if key in self._cache:
            return self._cache[key]
        frame = self.frame_at(s)
        H_coeffs = self.family.taylor_coefficients(s, self.N + 1)
        J = _series_jets(H_coeffs, frame, self.N)
        out = (J[:, 0].copy(), J[:, 1].copy())
        if len(self._cache) < 4096:
            self._cache[key] = out
        return out

    def evaluate(self, j: int, s: float) -> np.ndarray:
        return self.at(s)[0][j]

    def evaluate_derivative(self, j: int, s: float) -> np.ndarray:
        return self.at(s)[1][j]

    def interpolate(self, j: int, s):
        """Barycentric Chebyshev interpolation of the tabulated B_j."""
        return chebyshev.barycentric_interpolate(self.grid, self.terms[j], s)

    def spectral_derivative(self, j: int) -> np.ndarray:
        """dB_j/ds on the grid by Chebyshev differentiation of the table."""
        D = chebyshev.differentiation_matrix(self.M)
        return np.einsum("ik,kab->iab", D, self.terms[j])

    def derivative_norm_integral(self, j: int, s: float) -> float:
        """int_0^s ||dB_j/dr|| dr by adaptive quadrature of exact values."""
        from scipy.integrate import quad

        s = float(min(max(s, 0.0), 1.0))
        if s == 0.0:
            return 0.0

        def integrand(r):
            return _norm(self.evaluate_derivative(j, r))

        # split at the grid nodes inside [0, s] where the integrand is largest
        val, _ = quad(integrand, 0.0, s, limit=400, epsabs=1e-13, epsrel=1e-10)
        return float(val)


def compute_series(fam: HamiltonianFamily, band_path: BandPath | None = None, N: int = 2,
                   M: int | None = None, *, band=0, warn: bool = True) -> ExpansionSeries:
    """Tabulate B_0..B_N (and derivatives) on M Chebyshev-Gauss-Lobatto nodes.

    ``band_path`` supplies the tracked band; when its grid differs from the
    collocation grid the band is re-tracked from its first frame.
    """
    N = int(N)
    if N < 0:
        raise ValidationError("N must be non-negative")
    if N > MAX_EXPANSION_ORDER:
        raise ValidationError(f"N={N} exceeds the supported maximum {MAX_EXPANSION_ORDER}")
    if M is None:
        M = default_grid_size(N)
    if M < 4 * N + 33:
        raise ValidationError(f"M={M} is below the resolution floor 4N+33={4 * N + 33}")
    grid = chebyshev.lobatto_nodes(M)
    if band_path is not None and len(band_path.grid) == M and np.array_equal(band_path.grid, grid):
        path = band_path
    else:
        start = band if band_path is None else band_path.frames[0].band[0]
        path = track_band(fam, grid, start)
    d = fam.dimension
    terms = np.zeros((N + 1, M, d, d), dtype=np.clongdouble)
    derivs = np.zeros_like(terms)
    for i, (s, frame) in enumerate(zip(grid, path.frames)):
        J = _series_jets(fam.taylor_coefficients(s, N + 1), frame, N)
        terms[:, i] = J[:, 0]
        derivs[:, i] = J[:, 1]
    tails = np.array([chebyshev.tail_ratio(terms[j]) for j in range(N + 1)])
    if warn and np.any(tails > RESOLUTION_TOL):
        worst = int(np.argmax(tails))
        warnings.warn(
            f"Chebyshev tail of B_{worst} is {tails[worst]:.2e} of the leading coefficient "
            f"on {M} nodes; spectral differentiation of the table is under-resolved "
            "(exact jet derivatives are unaffected)",
            ResolutionWarning, stacklevel=2)
    return ExpansionSeries(family=fam, N=N, grid=grid, terms=terms, derivs=derivs,
                           frames=path.frames, tail_ratios=tails)


def truncated_projector(series: ExpansionSeries, tau: float, s: float, *,
                        order: int | None = None, method: str = "exact") -> np.ndarray:
    """sum_{j<=order} tau^{-j} B_j(s); ``method`` is "exact" or "barycentric".

    Outside [0, 1] the family is constant, so B_0 is the endpoint projector
    and every correction vanishes.
    """
    if tau <= 0:
        raise ValidationError("tau must be positive")
    n = series.N if order is None else int(order)
    if not 0 <= n <= series.N:
        raise ValidationError(f"order {n} outside 0..{series.N}")
    s = float(s)
    if s <= 0.0 or s >= 1.0:
        return series.frame_at(min(max(s, 0.0), 1.0)).P.copy()
    if method == "exact":
        Bs = series.at(s)[0]
    elif method == "barycentric":
        Bs = [series.interpolate(j, s) for j in range(n + 1)]
    else:
        raise ValueError(f"unknown evaluation method {method!r}")
    out = np.zeros_like(Bs[0])
    for j in range(n, -1, -1):          # smallest terms first
        out += np.longdouble(tau) ** (-j) * Bs[j]
    return out.astype(complex)


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------

def algebraic_residuals(series: ExpansionSeries) -> np.ndarray:
    """max over nodes of ||B_j - sum_m B_m B_{j-m}||, per j."""
    out = np.zeros(series.N + 1)
    for j in range(series.N + 1):
        worst = 0.0
        for i in range(series.M):
            acc = series.terms[j, i].copy()
            for m in range(j + 1):
                acc -= series.terms[m, i] @ series.terms[j - m, i]
            worst = max(worst, _norm(acc))
        out[j] = worst
    return out


def fd_derivative(series: ExpansionSeries, j: int, s: float, h: float = 1e-3) -> np.ndarray:
    """8th-order central difference of the exactly evaluated B_j."""
    c = (4 / 5, -1 / 5, 4 / 105, -1 / 280)
    acc = np.zeros_like(series.terms[0, 0])
    for n, cn in enumerate(c, start=1):
        acc += cn * (series.evaluate(j, s + n * h) - series.evaluate(j, s - n * h))
    return acc / h


def differential_residuals(series: ExpansionSeries, derivative: str = "jet",
                           interior_only: bool = True) -> np.ndarray:
    """max over nodes of ||i dB_j/ds - [H, B_{j+1}]||, per j < N.

    ``derivative`` selects how dB_j/ds is obtained: "jet" (tabulated jets),
    "fd" (8th-order finite differences of exact values, independent of the
    jets) or "spectral" (Chebyshev differentiation of the table).
    """
    idx = range(1, series.M - 1) if interior_only else range(series.M)
    out = np.zeros(max(series.N, 0))
    for j in range(series.N):
        if derivative == "spectral":
            dB = series.spectral_derivative(j)
        worst = 0.0
        for i in idx:
            s = series.grid[i]
            if derivative == "jet":
                d = series.derivs[j, i]
            elif derivative == "fd":
                d = fd_derivative(series, j, s)
            elif derivative == "spectral":
                d = dB[i]
            else:
                raise ValueError(f"unknown derivative source {derivative!r}")
            H = series.frames[i].H
            worst = max(worst, _norm(1j * d - commutator(H, series.terms[j + 1, i])))
        out[j] = worst
    return out


def contour_b1(series: ExpansionSeries, nodes: int = DEFAULT_CONTOUR_NODES) -> np.ndarray:
    """B_1 on the grid from resolvent quadrature only.

    dP/ds comes from the contour representation of the projector
    derivative, then B_1 = contour_map([P, dP/ds]).
    """
    out = np.zeros_like(series.terms[1])
    for i, (s, frame) in enumerate(zip(series.grid, series.frames)):
        Hdot = series.family.derivative(s, 1)
        Pdot = projector_derivative_contour(frame, Hdot, nodes)
        out[i] = contour_map(frame, commutator(frame.P, Pdot), nodes)
    return out
