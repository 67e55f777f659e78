import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oulab import matkit
from oulab.exceptions import NearSingularError, SectorialityError, StabilityError

from conftest import random_stable, taylor_expm

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_as_matrix_scalar_and_errors():
    assert matkit.as_matrix(3.0).shape == (1, 1)
    with pytest.raises(ValueError):
        matkit.as_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        matkit.as_matrix([[1.0, 2.0]], square=True)


def test_spectrum_rotation_conjugate_pair():
    sp = matkit.spectrum([[-1.0, -1.0], [1.0, -1.0]])
    assert sp.pairs() == [(-1.0, -1.0), (-1.0, 1.0)]
    assert sp.abscissa == pytest.approx(-1.0)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 6), st.floats(-3.0, 3.0))
def test_expm_matches_taylor_oracle(seed, d, t):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((d, d))
    E = matkit.expm(M, t)
    assert np.allclose(E, taylor_expm(M, t), rtol=1e-10, atol=1e-12 * max(1.0, np.abs(E).max()))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 5), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_expm_semigroup_property(seed, d, s, t):
    M = np.random.default_rng(seed).standard_normal((d, d))
    lhs = matkit.expm(M, s + t)
    rhs = matkit.expm(M, s) @ matkit.expm(M, t)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * max(1.0, np.abs(lhs).max()))


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 8))
def test_lyapunov_schur_matches_kronecker(seed, d):
    A = random_stable(np.random.default_rng(seed), d)
    Qs = matkit.solve_lyapunov(A)
    Qk = matkit.solve_lyapunov(A, method="kronecker")
    assert np.allclose(Qs, Qk, rtol=1e-8, atol=1e-10)
    assert np.allclose(Qs, Qs.T)
    assert np.linalg.eigvalsh(Qs).min() > 0
    assert np.linalg.norm(A @ Qs + Qs @ A.T + np.eye(d)) <= 1e-10 * d * max(1.0, np.linalg.norm(Qs))


def test_lyapunov_known_values():
    assert np.allclose(matkit.solve_lyapunov(-np.eye(3)), 0.5 * np.eye(3))
    assert np.allclose(matkit.solve_lyapunov([[-1.0, -1.0], [1.0, -1.0]]), 0.5 * np.eye(2))
    assert matkit.solve_lyapunov([[-2.0]])[0, 0] == pytest.approx(0.25)


def test_lyapunov_unstable_names_eigenvalue():
    with pytest.raises(StabilityError) as info:
        matkit.solve_lyapunov([[0.5, 0.0], [0.0, -1.0]])
    assert info.value.eigenvalue.real == pytest.approx(0.5)
    with pytest.raises(StabilityError):
        matkit.solve_lyapunov([[0.0, 1.0], [-1.0, 0.0]])  # purely imaginary spectrum


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 6))
def test_sqrtm_squares_back_with_right_half_plane_spectrum(seed, d):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((d, d))
    M = G @ G.T + 0.1 * np.eye(d) + 0.5 * (G - G.T)
    R = matkit.sqrtm_principal(M)
    assert np.allclose(R @ R, M, atol=1e-8 * np.linalg.norm(M))
    assert np.linalg.eigvals(R).real.min() > 0


def test_sqrtm_rejects_negative_axis():
    with pytest.raises(SectorialityError):
        matkit.sqrtm_principal([[-1.0, 0.0], [0.0, 1.0]])


def test_resolvent_inverse_and_near_singular():
    M = np.array([[-1.0, -1.0], [1.0, -1.0]])
    R = matkit.resolvent(M, 0.5 + 0.25j)
    assert np.allclose(R @ ((0.5 + 0.25j) * np.eye(2) - M), np.eye(2))
    with pytest.raises(NearSingularError):
        matkit.resolvent(M, -1.0 + 1.0j)


def test_op_norm():
    assert matkit.op_norm([[3.0, 0.0], [0.0, -4.0]]) == pytest.approx(4.0)
    assert matkit.op_norm([[0.5, -0.5], [0.5, 0.5]]) == pytest.approx(1 / np.sqrt(2))
