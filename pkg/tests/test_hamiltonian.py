import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from adiabatic_switch.errors import (GapCollapseError, NearSingularError, NormalizationWarning,
                                     TrackingError, ValidationError)
from adiabatic_switch.hamiltonian import (SIGMA_X, SIGMA_Z, family_derivative, frame_from_matrix,
                                          interpolating_family, refined_min_gap, resolvent,
                                          spectral_frame, track_band)
from adiabatic_switch.schedule import constant_schedule

from conftest import random_hermitian


def quiet_family(HI, HF, sched):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NormalizationWarning)
        return interpolating_family(HI, HF, sched)


def test_equal_endpoints_give_constant_family(bump):
    fam = interpolating_family(np.eye(3), np.eye(3), bump)
    for s in (0.0, 0.3, 0.9, 1.0):
        assert np.array_equal(fam(s), np.eye(3))


def test_midpoint_of_sigma_z_family_vanishes(bump):
    fam = interpolating_family(SIGMA_Z, -SIGMA_Z, bump)
    assert np.linalg.norm(fam(0.5)) < 1e-14


def test_defining_formula(bump):
    rng = np.random.default_rng(1)
    HI, HF = random_hermitian(rng, 4), random_hermitian(rng, 4)
    fam = quiet_family(HI, HF, bump)
    f = bump.value(0.25)
    assert np.max(np.abs(fam(0.25) - ((1 - f) * HI + f * HF))) <= 1e-15 * np.abs(HI).max()


def test_endpoints(bump):
    rng = np.random.default_rng(2)
    HI, HF = random_hermitian(rng, 3), random_hermitian(rng, 3)
    fam = quiet_family(HI, HF, bump)
    assert np.array_equal(fam(0.0), HI.astype(complex))
    assert np.max(np.abs(fam(1.0) - HF)) < 1e-15 * np.abs(HF).max()


def test_validation(bump):
    with pytest.raises(ValidationError):
        interpolating_family(np.array([[0, 1], [0, 0]]), np.eye(2), bump)
    with pytest.raises(ValidationError):
        interpolating_family(np.eye(2), np.eye(3), bump)


def test_normalization_warning(bump):
    with pytest.warns(NormalizationWarning):
        interpolating_family(2 * SIGMA_Z, -SIGMA_Z, bump)


def test_derivative_outside_support(two_level):
    fam = two_level(0.2)
    for k in (1, 3, 7):
        assert np.all(family_derivative(fam, 1.2, k) == 0)


def test_derivative_at_midpoint(two_level, bump):
    fam = two_level(0.2)
    expected = bump.beta * np.exp(-4.0) * (fam.H_F - fam.H_I)
    assert np.max(np.abs(family_derivative(fam, 0.5, 1) - expected)) < 1e-14


def test_derivative_norm_factorizes(two_level, bump):
    fam = two_level(0.3)
    s = 0.41
    lhs = np.linalg.norm(family_derivative(fam, s, 6), 2)
    rhs = abs(bump.derivative(s, 6)) * np.linalg.norm(fam.H_F - fam.H_I, 2)
    assert abs(lhs - rhs) <= 1e-12 * rhs


def test_diagonal_frame():
    fr = frame_from_matrix(np.diag([-1.0, 1.0]), 0.0)
    assert np.allclose(fr.P, np.diag([1, 0]))
    assert fr.E == -1.0 and fr.gap == 2.0


@pytest.mark.parametrize("delta", [0.05, 0.2, 0.4])
def test_gap_at_crossing(two_level, bump, delta):
    fam = two_level(delta)
    fr = spectral_frame(fam, 0.5, "ground")
    assert abs(fr.gap - 2 * delta) < 1e-13


def test_random_projector_against_second_solver():
    rng = np.random.default_rng(3)
    H = random_hermitian(rng, 4)
    fr = frame_from_matrix(H, 0.0, 0)
    w, V = scipy.linalg.eigh(H, driver="ev")
    P = np.outer(V[:, 0], V[:, 0].conj())
    assert np.linalg.norm(fr.P - P, 2) < 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
@settings(max_examples=40, deadline=None)
def test_frame_invariants(seed, d):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, d)
    fr = frame_from_matrix(H, 0.0, int(rng.integers(d)))
    I = np.eye(d)
    assert np.linalg.norm(fr.P @ fr.P - fr.P, 2) < 1e-12
    assert np.linalg.norm(fr.P - fr.P.conj().T, 2) < 1e-12
    assert np.linalg.norm(fr.P + fr.Q - I, 2) < 1e-12
    assert np.linalg.norm(fr.P @ fr.Q, 2) < 1e-12
    assert np.linalg.norm(H @ fr.P - fr.E * fr.P, 2) < 1e-10 * max(1, np.abs(fr.energies).max())
    recon = fr.vectors @ np.diag(fr.energies) @ fr.vectors.conj().T
    assert np.linalg.norm(recon - H, 2) < 1e-11 * max(1, np.linalg.norm(H, 2))
    others = np.delete(fr.energies, list(fr.band))
    assert fr.gap == pytest.approx(np.min(np.abs(others - fr.E)))


def test_degenerate_band_and_gap_collapse():
    fr = frame_from_matrix(np.diag([0.0, 0.0, 1.0]), 0.0, 0)
    assert fr.band == (0, 1) and fr.rank == 2
    with pytest.raises(GapCollapseError):
        frame_from_matrix(np.diag([0.0, 1e-13, 1.0]), 0.0, band=(0,))


def test_resolvent_examples():
    fr = frame_from_matrix(np.diag([0.0, 2.0]), 0.0)
    assert np.allclose(resolvent(fr, 1.0), np.diag([-1.0, 1.0]))
    with pytest.raises(NearSingularError):
        resolvent(fr, 2.0)


def test_resolvent_norm_on_contour(two_level):
    fr = spectral_frame(two_level(0.2), 0.5)
    for th in np.linspace(0, 2 * np.pi, 7):
        z = fr.E + fr.gap / 2 * np.exp(1j * th)
        assert np.linalg.norm(resolvent(fr, z), 2) == pytest.approx(2 / fr.gap, rel=1e-12)


def test_resolvent_identity_random():
    rng = np.random.default_rng(4)
    H = random_hermitian(rng, 6)
    fr = frame_from_matrix(H, 0.0)
    z = 0.3 + 0.7j
    assert np.linalg.norm((H - z * np.eye(6)) @ resolvent(fr, z) - np.eye(6), 2) < 1e-12


def test_track_constant_family():
    fam = interpolating_family(np.diag([-1.0, 1.0]), np.diag([-1.0, 1.0]), constant_schedule())
    path = track_band(fam, np.linspace(0, 1, 5))
    assert all(np.array_equal(f.P, path.frames[0].P) for f in path.frames)
    assert path.min_gap == path.frames[0].gap
    two = track_band(fam, [0.0, 1.0])
    assert np.linalg.norm(two.frames[1].P - two.frames[0].P, 2) == 0.0


@pytest.mark.parametrize("delta", [0.4, 0.2, 0.1, 0.05])
def test_tracked_min_gap(two_level, delta):
    fam = two_level(delta)
    path = track_band(fam, np.linspace(0, 1, 401))
    g = refined_min_gap(fam, path)
    assert abs(g - 2 * delta) <= 2 * delta * 1e-6
    jumps = [np.linalg.norm(b.P - a.P, 2) for a, b in zip(path.frames, path.frames[1:])]
    assert max(jumps) < 0.5


def test_tracking_ambiguity(bump):
    # exact crossing (delta = 0): the ground band swaps at s = 1/2
    fam = interpolating_family(SIGMA_Z, -SIGMA_Z, bump)
    with pytest.raises((TrackingError, GapCollapseError)):
        track_band(fam, np.linspace(0, 1, 11))
