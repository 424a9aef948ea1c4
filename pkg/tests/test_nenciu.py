import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adiabatic_switch.errors import ResolutionWarning, ValidationError
from adiabatic_switch.hamiltonian import frame_from_matrix, interpolating_family
from adiabatic_switch.nenciu import (DEFAULT_CONTOUR_NODES, algebraic_residuals, commutator,
                                     compute_series, contour_b1, contour_map,
                                     diagonal_blocks_from_S, differential_residuals,
                                     contour_recursion_term, s_term, solve_commutator_offdiag,
                                     truncated_projector)
from adiabatic_switch.schedule import constant_schedule

from conftest import random_hermitian


def offdiag_blocks(frame, A):
    P, Q = frame.P, frame.Q
    return P @ A @ Q + Q @ A @ P


def quiet_series(fam, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionWarning)
        return compute_series(fam, **kw)


@pytest.fixture(scope="module")
def series2(two_level):
    return quiet_series(two_level(0.2), N=2)


@pytest.fixture(scope="module")
def series4(two_level):
    return quiet_series(two_level(0.2), N=4, M=97)


# ---------------------------------------------------------------- block solve

def test_single_residue():
    g0, y = 0.7, 0.3 - 0.2j
    fr = frame_from_matrix(np.diag([0.0, g0]), 0.0)
    Y = np.array([[0, y], [np.conj(y), 0]])
    X = solve_commutator_offdiag(fr, Y)
    assert X[0, 1] == pytest.approx(-1j * y / g0, abs=1e-15)


def test_zero_input():
    fr = frame_from_matrix(np.diag([0.0, 1.0, 3.0]), 0.0)
    assert np.all(solve_commutator_offdiag(fr, np.zeros((3, 3))) == 0)
    assert np.all(diagonal_blocks_from_S(fr, np.zeros((3, 3))) == 0)
    assert np.all(contour_map(fr, np.zeros((3, 3))) == 0)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_commutator_relation_5x5(seed):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, 5)
    fr = frame_from_matrix(H, 0.0, int(rng.integers(5)))
    Y = random_hermitian(rng, 5)
    X = solve_commutator_offdiag(fr, Y)
    assert np.linalg.norm(fr.P @ X @ fr.P) < 1e-12 and np.linalg.norm(fr.Q @ X @ fr.Q) < 1e-12
    resid = offdiag_blocks(fr, commutator(H, X) - 1j * Y)
    assert np.linalg.norm(resid, 2) < 1e-12 * max(1.0, np.linalg.norm(X, 2) / fr.gap)


def test_diagonal_blocks_of_projector():
    rng = np.random.default_rng(5)
    fr = frame_from_matrix(random_hermitian(rng, 4), 0.0)
    assert np.linalg.norm(diagonal_blocks_from_S(fr, fr.P) + fr.P) < 1e-14


def test_s_term_first_is_zero():
    assert np.all(s_term([np.eye(2), np.ones((2, 2))], 1) == 0)


# ---------------------------------------------------------------- contour oracle

def test_contour_node_doubling():
    rng = np.random.default_rng(6)
    H = random_hermitian(rng, 4)
    fr = frame_from_matrix(H, 0.0, 1)
    A = random_hermitian(rng, 4)
    a, b = contour_map(fr, A, 64), contour_map(fr, A, 128)
    assert np.linalg.norm(a - b, 2) <= 1e-12 * max(1.0, np.linalg.norm(b, 2))


def test_contour_closed_form_residue():
    # hand residue calculus: (1/2pi) ccw int R A R = -i (P A Rt + Rt A P)
    rng = np.random.default_rng(7)
    H = random_hermitian(rng, 2)
    fr = frame_from_matrix(H, 0.0)
    A = random_hermitian(rng, 2)
    Rt = fr.reduced_resolvent()
    expected = -1j * (fr.P @ A @ Rt + Rt @ A @ fr.P)
    assert np.linalg.norm(contour_map(fr, A) - expected, 2) < 1e-13


def test_contour_equals_block_solve():
    rng = np.random.default_rng(8)
    H = random_hermitian(rng, 5)
    fr = frame_from_matrix(H, 0.0, 2)
    Y = random_hermitian(rng, 5)
    a = contour_map(fr, commutator(fr.P, Y))
    b = solve_commutator_offdiag(fr, Y)
    assert np.linalg.norm(a - b, 2) < 1e-12 * max(1.0, np.linalg.norm(b, 2))


def test_contour_needs_nodes():
    fr = frame_from_matrix(np.diag([0.0, 1.0]), 0.0)
    with pytest.raises(ValueError):
        contour_map(fr, np.eye(2), 8)


# ---------------------------------------------------------------- series

def test_constant_family_has_no_corrections():
    fam = interpolating_family(np.diag([-1.0, 0.5, 1.0]), np.diag([-1.0, 0.5, 1.0]),
                               constant_schedule())
    ser = compute_series(fam, N=3)
    assert np.all(ser.terms[1:] == 0)


def test_series_invariants(series4):
    ser = series4
    P = np.stack([fr.P for fr in ser.frames])
    assert np.max(np.abs(ser.terms[0] - P)) < 1e-11
    for j in range(ser.N + 1):
        Bj = ser.terms[j].astype(complex)
        assert np.max(np.abs(Bj - np.conj(np.swapaxes(Bj, 1, 2)))) < 1e-10 * max(1, np.abs(Bj).max())
    for j in range(1, ser.N + 1):
        assert np.linalg.norm(ser.terms[j, 0].astype(complex)) <= 1e-9
        assert np.linalg.norm(ser.terms[j, -1].astype(complex)) <= 1e-9
        tr = np.trace(ser.terms[j].astype(complex), axis1=1, axis2=2)
        assert np.max(np.abs(tr)) < 1e-10
    for i, fr in enumerate(ser.frames):
        B1 = ser.terms[1, i].astype(complex)
        assert np.linalg.norm(fr.P @ B1 @ fr.P) < 1e-10 and np.linalg.norm(fr.Q @ B1 @ fr.Q) < 1e-10


def test_algebraic_hierarchy(series4):
    assert np.all(algebraic_residuals(series4) <= 1e-8)


def test_b2_quadratic_identity(series2):
    assert algebraic_residuals(series2)[2] <= 1e-9


def test_differential_hierarchy_with_jets(series4):
    assert np.all(differential_residuals(series4, "jet") <= 1e-7)


def test_differential_hierarchy_independent_fd(series2):
    # independent derivative source: finite differences of exactly evaluated B_j
    assert np.all(differential_residuals(series2, "fd") <= 1e-7)


def test_b1_against_contour(series2):
    c = contour_b1(series2, DEFAULT_CONTOUR_NODES)
    assert np.max(np.abs(c - series2.terms[1].astype(complex))) < 1e-8


def test_contour_recursion_agrees_with_block_solve(series4):
    # contour form with the explicit S_j - 2 P S_j P term reproduces B_j
    ser = series4
    for j in range(2, ser.N + 1):
        for i in range(5, ser.M - 5, 9):
            fr = ser.frames[i]
            Bs = [ser.terms[m, i].astype(complex) for m in range(j)]
            S = s_term(Bs, j)
            got = contour_recursion_term(fr, ser.derivs[j - 1, i].astype(complex), S)
            ref = ser.terms[j, i].astype(complex)
            assert np.linalg.norm(got - ref, 2) <= 1e-9 * max(1.0, np.linalg.norm(ref, 2))


def test_resolution_guard(two_level):
    with pytest.raises(ValidationError):
        compute_series(two_level(0.2), N=4, M=40)
    with pytest.raises(ValidationError):
        compute_series(two_level(0.2), N=13)
    with pytest.warns(ResolutionWarning):
        compute_series(two_level(0.2), N=4, M=97)


def test_truncated_projector_limits(series2):
    s = 0.43
    P = series2.frame_at(s).P
    assert np.linalg.norm(truncated_projector(series2, 1e3, s, order=0) - P) < 1e-14
    assert np.linalg.norm(truncated_projector(series2, 1e16, s) - P) < 1e-14


@pytest.mark.parametrize("method", ["exact", "barycentric"])
def test_truncated_projector_hermitian_trace(series2, method):
    for s in (0.2, 0.5, 0.77):
        T = truncated_projector(series2, 50.0, s, method=method)
        assert np.linalg.norm(T - T.conj().T) < 1e-10
        assert abs(np.trace(T) - 1.0) < 1e-10


def test_interpolation_matches_exact_evaluation(two_level):
    ser = quiet_series(two_level(0.4), N=1, M=129)
    for s in (0.31, 0.5, 0.66):
        a, b = ser.interpolate(1, s), ser.evaluate(1, s)
        assert np.max(np.abs(a - b)) < 1e-6 * np.abs(b).max()


def test_endpoint_extrapolation(series2):
    assert np.linalg.norm(truncated_projector(series2, 10.0, 1.5) - series2.frames[-1].P) < 1e-14
    assert np.linalg.norm(truncated_projector(series2, 10.0, -0.5) - series2.frames[0].P) < 1e-14
