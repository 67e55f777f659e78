import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oulab.exceptions import CapabilityError, StabilityError
from oulab.model import (
    build_model,
    duality_residual,
    gauss_hermite_rule,
    gaussian_expectation,
    generator_apply,
    generator_polynomial,
)
from oulab.testfunctions import ExpLinear, Polynomial, TanhLinear

from conftest import random_stable

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_symmetric_model_constants(sym1d):
    assert sym1d.Q[0, 0] == pytest.approx(0.5)
    assert sym1d.B[0, 0] == pytest.approx(0.5)
    assert sym1d.w == pytest.approx(1.0)
    assert sym1d.M == pytest.approx(1.0)


def test_minus_identity_in_three_dimensions():
    m = build_model(-np.eye(3))
    assert np.allclose(m.Q, 0.5 * np.eye(3))
    assert np.allclose(m.B, 0.5 * np.eye(3))
    assert m.w == pytest.approx(1.0)


def test_rotation_B_and_selection_note(rot2d):
    assert np.allclose(rot2d.B, [[0.5, -0.5], [0.5, 0.5]])
    assert np.allclose(rot2d.B, -rot2d.Q @ rot2d.A.T)
    assert any("selected by the generator/form duality" in n for n in rot2d.notes)


def test_unstable_and_oversize():
    with pytest.raises(StabilityError):
        build_model([[0.1]])
    with pytest.raises(CapabilityError):
        build_model(-np.eye(65))


def test_growth_bound_non_normal():
    # Jordan-type drift: ||exp(tA)|| overshoots 1 before decaying
    m = build_model([[-1.0, 4.0], [0.0, -1.0]])
    ts = np.linspace(0, 10, 2001)
    sup = max(np.linalg.norm(m.semigroup(t), 2) for t in ts)
    assert m.M >= 0.99 * sup
    assert m.M > 1.0


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 8))
def test_B_structure(seed, d):
    rng = np.random.default_rng(seed)
    m = build_model(random_stable(rng, d))
    assert np.abs(m.B + m.B.T - np.eye(d)).max() <= 1e-12
    h = rng.standard_normal(d)
    assert h @ m.B @ h == pytest.approx(0.5 * h @ h, rel=1e-10)
    assert np.linalg.norm(m.A @ m.Q + m.Q @ m.A.T + np.eye(d)) <= 1e-10 * d * max(1, np.linalg.norm(m.Q))


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(1, 3))
def test_duality_both_routes_on_cubics(seed, d):
    rng = np.random.default_rng(seed)
    m = build_model(random_stable(rng, d))
    q = gauss_hermite_rule(m.measure, 4)
    f = Polynomial.random(d, 3, 5, rng)
    g = Polynomial.random(d, 3, 5, rng)
    assert abs(duality_residual(m, f, g)) <= 1e-8
    assert abs(duality_residual(m, f, g, q)) <= 1e-8


def test_wrong_B_breaks_duality(rot2d):
    from dataclasses import replace

    wrong = replace(rot2d, B=-rot2d.A @ rot2d.Q)
    f = Polynomial.monomial((1, 1))
    g = Polynomial.monomial((2, 0))
    assert abs(duality_residual(wrong, f, g)) > 1e-3


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 4))
def test_isserlis_fourth_moments(seed, d):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((d, d))
    Q = G @ G.T + 0.2 * np.eye(d)
    for idx in itertools.combinations_with_replacement(range(d), 4):
        e = [0] * d
        for i in idx:
            e[i] += 1
        i, j, k, l_ = idx
        expected = Q[i, j] * Q[k, l_] + Q[i, k] * Q[j, l_] + Q[i, l_] * Q[j, k]
        assert gaussian_expectation(Polynomial.monomial(tuple(e)), Q) == pytest.approx(expected, rel=1e-12)


def test_gauss_hermite_exactness_and_cap(rot2d):
    q = gauss_hermite_rule(rot2d.measure, 5)
    for e in [(0, 0), (2, 0), (2, 2), (4, 0), (1, 3), (6, 2)]:
        p = Polynomial.monomial(e)
        assert q.integrate(p) == pytest.approx(gaussian_expectation(p, rot2d.Q), abs=1e-12)
    with pytest.raises(CapabilityError):
        gauss_hermite_rule(build_model(-np.eye(4)).measure, 3)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_generator_pointwise_matches_polynomial_route(seed):
    rng = np.random.default_rng(seed)
    m = build_model(random_stable(rng, 2))
    f = Polynomial.random(2, 3, 6, rng)
    X = rng.standard_normal((7, 2))
    assert np.allclose(generator_apply(m, f, X), generator_polynomial(m, f)(X), atol=1e-10)


def test_generator_on_exponentials(rot2d):
    # L e^{<a,x>} = (1/2 |a|^2 + <A x, a>) e^{<a,x>}
    a = np.array([0.3, -0.7])
    f = ExpLinear(a)
    X = np.array([[0.1, 0.2], [-1.0, 0.5]])
    expected = (0.5 * a @ a + (X @ rot2d.A.T) @ a) * np.exp(X @ a)
    assert np.allclose(generator_apply(rot2d, f, X), expected)
    t = TanhLinear(a)
    assert np.isfinite(generator_apply(rot2d, t, X)).all()


def test_measure_and_cameron_martin(rot2d):
    assert rot2d.measure.pdf(np.zeros(2))[0] == pytest.approx(1 / np.pi)
    assert rot2d.hinf_norm_sq([1.0, 0.0]) == pytest.approx(2.0)
