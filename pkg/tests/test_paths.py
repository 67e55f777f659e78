import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oulab import matkit, paths
from oulab.domains import HalfSpace
from oulab.exceptions import CapacityError
from oulab.model import build_model

from conftest import random_stable


def quadrature_Qh(A, h, n=200):
    """Gauss-Legendre approximation of int_0^h exp(sA) exp(sA^T) ds."""
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * h * (x + 1)
    out = np.zeros_like(A)
    for si, wi in zip(s, w):
        E = matkit.expm(A, si)
        out += 0.5 * h * wi * E @ E.T
    return out


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.sampled_from([1e-3, 0.1, 1.0, 5.0]))
def test_transition_covariance_matches_quadrature(seed, d, h):
    A = random_stable(np.random.default_rng(seed), d)
    E, Q = paths.transition_covariance(A, h)
    assert np.allclose(E, matkit.expm(A, h), rtol=1e-10, atol=1e-13)
    assert np.allclose(Q, quadrature_Qh(A, h), rtol=1e-8, atol=1e-12)
    Qinf = matkit.solve_lyapunov(A)
    assert np.linalg.eigvalsh(Qinf - Q).min() >= -1e-10


def test_transition_covariance_limits():
    A = np.array([[-1.0, -1.0], [1.0, -1.0]])
    _, Q = paths.transition_covariance(A, 40.0)
    assert np.allclose(Q, 0.5 * np.eye(2), atol=1e-14)
    _, Q0 = paths.transition_covariance(np.zeros((2, 2)), 0.3)
    assert np.allclose(Q0, 0.3 * np.eye(2))


def test_rng_streams_are_distinct_and_reproducible():
    a = paths.RngStream.for_block(5, 0, "x").generator().standard_normal(4)
    b = paths.RngStream.for_block(5, 0, "x").generator().standard_normal(4)
    c = paths.RngStream.for_block(5, 1, "x").generator().standard_normal(4)
    d = paths.RngStream.for_block(5, 0, "y").generator().standard_normal(4)
    e = paths.RngStream.for_block(6, 0, "x").generator().standard_normal(4)
    assert np.array_equal(a, b)
    for other in (c, d, e):
        assert not np.array_equal(a, other)
    with pytest.raises(ValueError):
        paths.RngStream(-1, 0)


def test_exact_step_moments(rot2d):
    k = paths.make_step_kernel(rot2d, 0.5)
    rng = np.random.default_rng(1)
    x = np.array([1.0, -2.0])
    Y = paths.exact_step(k, np.tile(x, (200_000, 1)), rng)
    assert np.allclose(Y.mean(axis=0), k.E @ x, atol=4 * math.sqrt(k.Q.max() / 200_000) * 1.5)
    assert np.allclose(np.cov(Y.T), k.Q, atol=0.01)


def test_euler_consistency_small_h(rot2d):
    rng = np.random.default_rng(0)
    z = rng.standard_normal((5, 2))
    X = rng.standard_normal((5, 2))
    h = 1e-6
    k = paths.make_step_kernel(rot2d, h)
    ex = paths.exact_step(k, X, None, z)
    eu = paths.euler_step(rot2d, h, X, None, z)
    assert np.allclose(ex, eu, atol=1e-8)


def test_bridge_kill_probability_and_exit_time():
    assert paths.bridge_kill_probability(0.1, 0.2, 0.01) == pytest.approx(math.exp(-2 * 0.02 / 0.01))
    assert paths.bridge_kill_probability(-0.1, 0.2, 0.01) == 1.0
    assert paths.interpolated_exit_time(1.0, 0.1, 0.3, -0.1) == pytest.approx(1.075)


def test_batch_determinism_across_jobs(sym1d):
    dom = HalfSpace([1.0])
    a = paths.simulate_batch(sym1d, [1.0], 0.2, 0.01, 3000, dom, seed=9, block_size=1024)
    b = paths.simulate_batch(sym1d, [1.0], 0.2, 0.01, 3000, dom, seed=9, block_size=1024, jobs=2)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.alive, b.alive)
    assert np.array_equal(a.exit_time, b.exit_time, equal_nan=True)


def test_zero_paths_and_caps(sym1d):
    b = paths.simulate_batch(sym1d, [1.0], 0.1, 0.01, 0)
    assert b.states.shape[0] == 0
    with pytest.raises(CapacityError):
        paths.simulate_batch(sym1d, [1.0], 1000.0, 1e-4, 10**6)


def test_started_outside_is_dead_at_zero(sym1d):
    b = paths.simulate_batch(sym1d, [-0.5], 0.1, 0.01, 10, HalfSpace([1.0]), seed=1)
    assert not b.alive[:, 0].any()
    assert np.all(b.exit_time == 0.0)


def test_trajectory_csv(tmp_path, sym1d):
    b = paths.simulate_batch(sym1d, [1.0], 0.05, 0.01, 3, HalfSpace([1.0]), seed=2)
    p = tmp_path / "traj.csv"
    paths.write_trajectory_csv(b, p)
    lines = p.read_text().splitlines()
    header = [ln for ln in lines if not ln.startswith("#")][0]
    assert header == "path,t,x1,alive"
    assert len([ln for ln in lines if not ln.startswith("#")]) == 1 + 3 * 6


def test_increment_reference_pair(sym1d):
    rows = paths.stationary_increment_check(sym1d, [1.0], [(0.0, math.log(2.0))], 100_000, 7)
    r = rows[0]
    assert r["closed_form"] == pytest.approx(0.5)
    assert abs(r["estimate"] - 0.5) <= 4 * r["std_error"]
    assert r["closed_form"] <= r["bound"]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.floats(0.0, 1.0))
def test_increment_closed_form_below_linear_bound(seed, d, tau):
    rng = np.random.default_rng(seed)
    m = build_model(random_stable(rng, d))
    xs = rng.standard_normal(d)
    rows = paths.stationary_increment_check(m, xs, [(0.0, 0.0), (0.0, tau)], 10, seed)
    for r in rows:
        assert r["closed_form"] <= r["bound"] * (1 + 1e-9) + 1e-12
