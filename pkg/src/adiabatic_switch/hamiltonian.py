"""Interpolating Hamiltonian families and their instantaneous spectral data."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    GapCollapseError,
    NearSingularError,
    NormalizationWarning,
    TrackingError,
    ValidationError,
)
from .schedule import Schedule

CLUSTER_TOL = 1e-10
GAP_FLOOR = 1e-12
HERMITIAN_TOL = 1e-12
MAX_DIMENSION = 64

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _check_hermitian(name, H):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {H.shape}")
    dev = np.max(np.abs(H - H.conj().T)) if H.size else 0.0
    if dev > HERMITIAN_TOL:
        raise ValidationError(f"{name} is not Hermitian (deviation {dev:.3e})")
    return 0.5 * (H + H.conj().T)


@dataclass(frozen=True, eq=False)
class HamiltonianFamily:
    """H(s) = (1 - f(s)) H_I + f(s) H_F."""

    H_I: np.ndarray
    H_F: np.ndarray
    schedule: Schedule

    @property
    def dimension(self) -> int:
        return self.H_I.shape[0]

    @property
    def difference(self) -> np.ndarray:
        return self.H_F - self.H_I

    def at_switch(self, fval: float) -> np.ndarray:
        """Hamiltonian at a given value of the switching function."""
        return (1.0 - fval) * self.H_I + fval * self.H_F

    def __call__(self, s: float) -> np.ndarray:
        return self.at_switch(self.schedule.value(float(s)))

    def derivative(self, s: float, k: int) -> np.ndarray:
        return family_derivative(self, s, k)

    def taylor_coefficients(self, s: float, order: int) -> list[np.ndarray]:
        """[H(s), H'(s), H''(s)/2!, ...] up to ``order``."""
        coeffs = [self(s)]
        fact = 1.0
        for k in range(1, order + 1):
            fact *= k
            coeffs.append(self.schedule.derivative(float(s), k) / fact * self.difference)
        return coeffs


def interpolating_family(H_I, H_F, sched: Schedule) -> HamiltonianFamily:
    """Validate the endpoints and build the interpolating family."""
    H_I = _check_hermitian("H_I", H_I)
    H_F = _check_hermitian("H_F", H_F)
    if H_I.shape != H_F.shape:
        raise ValidationError(f"dimension mismatch: {H_I.shape} vs {H_F.shape}")
    if H_I.shape[0] > MAX_DIMENSION:
        raise ValidationError(f"dimension {H_I.shape[0]} exceeds supported {MAX_DIMENSION}")
    norms = (np.linalg.norm(H_I, 2), np.linalg.norm(H_F, 2))
    if any(abs(n - 1.0) > 1e-12 for n in norms):
        warnings.warn(
            f"endpoint norms are {norms[0]:.6g}, {norms[1]:.6g} (not 1)",
            NormalizationWarning, stacklevel=2)
    return HamiltonianFamily(H_I=H_I, H_F=H_F, schedule=sched)


def two_level_family(delta: float, sched: Schedule) -> HamiltonianFamily:
    """Avoided crossing H(s) = (1 - 2 f(s)) sigma_z + delta sigma_x.

    The gap is 2 sqrt((1 - 2f)^2 + delta^2), minimal (= 2 delta) at f = 1/2.
    """
    return interpolating_family(SIGMA_Z + delta * SIGMA_X, -SIGMA_Z + delta * SIGMA_X, sched)


def family_derivative(fam: HamiltonianFamily, s: float, k: int) -> np.ndarray:
    """d^k H / ds^k = f^(k)(s) (H_F - H_I) for k >= 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return fam.schedule.derivative(float(s), int(k)) * fam.difference


# --------------------------------------------------------------------------
# spectral frames
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralFrame:
    """Eigendecomposition of H(s) with a distinguished eigenvalue cluster."""

    s: float
    H: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    band: tuple
    E: float
    P: np.ndarray
    Q: np.ndarray
    gap: float

    @property
    def rank(self) -> int:
        return len(self.band)

    @property
    def band_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.energies), dtype=bool)
        mask[list(self.band)] = True
        return mask

    def reduced_resolvent(self) -> np.ndarray:
        """Q (H - E)^{-1} Q."""
        mask = ~self.band_mask
        V = self.vectors[:, mask]
        return (V / (self.energies[mask] - self.E)) @ V.conj().T

    def to_eigenbasis(self, A):
        return self.vectors.conj().T @ A @ self.vectors

    def from_eigenbasis(self, A):
        return self.vectors @ A @ self.vectors.conj().T


def clusters(energies, tol: float = CLUSTER_TOL) -> list[tuple]:
    """Group ascending eigenvalues into clusters of near-equal values."""
    groups = [[0]]
    for i in range(1, len(energies)):
        if energies[i] - energies[groups[-1][0]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return [tuple(g) for g in groups]


def frame_from_matrix(H, s: float, band_index: int = 0, *, band=None) -> SpectralFrame:
    """Spectral frame of an explicit Hermitian matrix.

    ``band_index`` selects the cluster containing the eigenvalue at that
    ascending position; ``band`` may instead give the index set directly.
    """
    H = np.asarray(H, dtype=complex)
    energies, vectors = np.linalg.eigh(H)
    if band is None:
        n = len(energies)
        if not -n <= band_index < n:
            raise ValidationError(f"band index {band_index} out of range for dimension {n}")
        band_index %= n
        ref = energies[band_index]
        band = tuple(int(i) for i in np.nonzero(np.abs(energies - ref) <= CLUSTER_TOL)[0])
    band = tuple(sorted(band))
    mask = np.zeros(len(energies), dtype=bool)
    mask[list(band)] = True
    E = float(np.mean(energies[mask]))
    if np.any(mask) and np.all(mask):
        gap = np.inf
    else:
        gap = float(np.min(np.abs(energies[~mask] - E)))
    if gap < GAP_FLOOR:
        raise GapCollapseError(f"gap {gap:.3e} at s={s} below {GAP_FLOOR}")
    Vb = vectors[:, mask]
    P = Vb @ Vb.conj().T
    Q = np.eye(len(energies)) - P
    return SpectralFrame(s=float(s), H=H, energies=energies, vectors=vectors, band=band,
                         E=E, P=P, Q=Q, gap=gap)


def spectral_frame(fam: HamiltonianFamily, s: float, band_selector=0) -> SpectralFrame:
    """Frame of H(s); ``band_selector`` is an ascending eigenvalue index or "ground"."""
    if band_selector in ("ground", "lowest"):
        band_selector = 0
    return frame_from_matrix(fam(s), s, int(band_selector))


def resolvent(frame: SpectralFrame, z: complex) -> np.ndarray:
    """(H(s) - z)^{-1} assembled in the eigenbasis."""
    dist = np.min(np.abs(frame.energies - z))
    if dist <= 1e-12:
        raise NearSingularError(f"z={z} lies within {dist:.2e} of the spectrum")
    V = frame.vectors
    return (V / (frame.energies - z)) @ V.conj().T


# --------------------------------------------------------------------------
# band tracking
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BandPath:
    grid: np.ndarray
    frames: tuple
    min_gap: float

    @property
    def gaps(self) -> np.ndarray:
        return np.array([fr.gap for fr in self.frames])


def track_band(fam: HamiltonianFamily, grid, initial_band=0) -> BandPath:
    """Follow an eigenvalue cluster across a sorted grid by projector overlap."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("grid must be a non-empty 1-d array")
    if np.any(np.diff(grid) < 0) or grid[0] < 0.0 or grid[-1] > 1.0:
        raise ValidationError("grid must be sorted within [0, 1]")
    frames = [spectral_frame(fam, grid[0], initial_band)]
    for s in grid[1:]:
        H = fam(s)
        energies, vectors = np.linalg.eigh(H)
        prev = frames[-1]
        scored = []
        for cl in clusters(energies):
            V = vectors[:, list(cl)]
            overlap = float(np.real(np.trace(prev.P @ V @ V.conj().T)))
            scored.append((overlap, cl))
        scored.sort(key=lambda t: -t[0])
        if len(scored) > 1 and scored[0][0] - scored[1][0] < 0.1:
            raise TrackingError(
                f"ambiguous band continuation at s={s}: overlaps "
                f"{scored[0][0]:.3f} vs {scored[1][0]:.3f}; refine the grid")
        fr = frame_from_matrix(H, s, band=scored[0][1])
        jump = np.linalg.norm(fr.P - prev.P, 2)
        if jump >= 0.5:
            raise TrackingError(f"projector jump {jump:.3f} at s={s}; refine the grid")
        frames.append(fr)
    min_gap = float(min(fr.gap for fr in frames))
    return BandPath(grid=grid, frames=tuple(frames), min_gap=min_gap)


def refined_min_gap(fam: HamiltonianFamily, path: BandPath) -> float:
    """Polish the grid minimum of the gap with a bounded scalar search."""
    from scipy.optimize import minimize_scalar

    gaps = path.gaps
    i = int(np.argmin(gaps))
    lo = path.grid[max(i - 1, 0)]
    hi = path.grid[min(i + 1, len(path.grid) - 1)]
    if hi <= lo:
        return float(gaps[i])
    band_size = path.frames[i].rank
    first = path.frames[i].band[0]

    def gap_at(s):
        energies = np.linalg.eigvalsh(fam(s))
        E = np.mean(energies[first:first + band_size])
        others = np.delete(energies, range(first, first + band_size))
        return np.min(np.abs(others - E)) if others.size else np.inf

    res = minimize_scalar(gap_at, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(res.fun, gaps[i]))
