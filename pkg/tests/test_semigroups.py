import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oulab import semigroups as sg
from oulab.domains import HalfSpace, PotentialSpec, WholeSpace
from oulab.model import build_model
from oulab.testfunctions import ExpLinear, Polynomial

from conftest import random_stable


def test_reference_value_of_exponential_oracle(sym1d):
    v = sg.exact_on_exponentials(sym1d, sg.ExpFunctional([1.0]), math.log(2.0), [0.0])
    assert float(v) == pytest.approx(math.exp(-1 / 16), rel=1e-14)
    assert float(v) == pytest.approx(0.93941, abs=5e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_oracle_semigroup_law_and_mean(seed, d, s, t):
    rng = np.random.default_rng(seed)
    m = build_model(random_stable(rng, d))
    xs = rng.standard_normal(d)
    x = rng.standard_normal(d)
    # P(s) P(t) K = P(s + t) K: exp(sA^T) exp(tA^T) x* = exp((s+t)A^T) x*
    y = sg.matkit.expm(m.A.T, t) @ xs
    lhs = sg.exact_on_exponentials(m, sg.ExpFunctional(y), s, x)
    rhs = sg.exact_on_exponentials(m, sg.ExpFunctional(xs), s + t, x)
    assert float(lhs) == pytest.approx(float(rhs), rel=1e-9)
    # K has unit mean under the invariant law
    assert sg.gaussian_mean(m, sg.ExpFunctional(xs).as_function(m)).mean == pytest.approx(1.0, rel=1e-12)


def test_mc_semigroup_agrees_with_oracle(rot2d):
    k = sg.ExpFunctional([0.5, -0.7])
    for t, x in ((0.3, [0.2, 0.1]), (1.5, [-1.0, 1.0])):
        est = sg.mc_semigroup(rot2d, k.as_function(rot2d), x, t, 50_000, seed=11)
        assert est.agrees(float(sg.exact_on_exponentials(rot2d, k, t, x)), 4.0)


def test_time_zero_is_exact(sym1d):
    f = Polynomial.linear([2.0], 1.0)
    assert sg.mc_semigroup(sym1d, f, [0.5], 0.0, 10).mean == 2.0
    est = sg.mc_killed(sym1d, HalfSpace([1.0]), f, [0.5], 0.0, 10, 0.01)
    assert est.mean == 2.0 and est.std_error == 0.0


def test_killed_rejects_outside_start_and_negative_time(sym1d):
    f = Polynomial.constant(1.0, 1)
    with pytest.raises(ValueError):
        sg.mc_killed(sym1d, HalfSpace([1.0]), f, [-0.5], 1.0, 10, 0.01)
    with pytest.raises(ValueError):
        sg.mc_semigroup(sym1d, f, [0.5], -1.0, 10)


def test_resolution_guard(sym1d):
    spec = PotentialSpec(HalfSpace([1.0]), 0.01)
    with pytest.raises(ValueError):
        sg.mc_feynman_kac(sym1d, spec, Polynomial.constant(1.0, 1), [1.0], 0.1, 10, 0.01)


def test_constant_potential_gives_exponential_factor(sym1d):
    f = Polynomial.linear([1.0])
    spec = sg.ConstantPotential(1.0, 0.5)
    fk = sg.mc_feynman_kac(sym1d, spec, f, [1.0], 0.5, 20_000, 0.01, seed=3)
    plain = math.exp(-0.5)  # P(t) x = e^{-t} x
    assert fk.agrees(plain * math.exp(-0.5 / 0.5), 4.0)


def test_feynman_kac_on_whole_space_is_plain(rot2d):
    f = ExpLinear([0.3, 0.1])
    spec = PotentialSpec(WholeSpace(2), 0.1)
    fk = sg.mc_feynman_kac(rot2d, spec, f, [0.0, 0.0], 0.2, 5000, 0.01, seed=2)
    k = sg.ExpFunctional([0.3, 0.1])
    a = np.array([0.3, 0.1])
    exact = float(sg.exact_on_exponentials(rot2d, k, 0.2, [0.0, 0.0])) * math.exp(0.5 * a @ rot2d.Q @ a)
    assert fk.agrees(exact, 4.0)


def test_log_survival_slope_on_exact_exponential():
    ts = np.linspace(1, 3, 9)
    ests = [sg.McEstimate(2.0 * math.exp(-1.3 * t), 1e-4, 100) for t in ts]
    slope, se = sg.log_survival_slope(ts, ests)
    assert slope == pytest.approx(-1.3, rel=1e-10)
    assert se > 0


def test_survival_is_monotone_and_matches_half_line_law(sym1d):
    # P(tau > t) for the 1-D OU with A=-1 from x: erf(x e^{-t} / sqrt(1 - e^{-2t}))
    times = [0.25, 0.5, 1.0]
    est = sg.survival_curve(sym1d, HalfSpace([1.0]), [1.0], times, 40_000, 1e-3, seed=4)
    means = [e.mean for e in est]
    assert means[0] > means[1] > means[2]
    for t, e in zip(times, est):
        exact = math.erf(math.exp(-t) / math.sqrt(1 - math.exp(-2 * t)))
        assert e.agrees(exact, 4.0)


def test_penalization_sweep_structure(sym1d):
    dom = HalfSpace([1.0])
    with pytest.raises(ValueError):
        sg.penalization_sweep(sym1d, dom, Polynomial.linear([1.0]), [1.0], 0.2, [0.1, 0.2], 100, 1e-3)
    rows, summ = sg.penalization_sweep(sym1d, dom, Polynomial.linear([1.0]), [1.0], 0.2, [0.2, 0.05],
                                       4000, 1e-2, seed=1)
    assert [r["eps"] for r in rows] == [0.2, 0.05]
    assert all(r["dominance"] for r in rows)
    assert set(summ) == {"killed", "bias", "monotone", "final_within", "order"}
    assert summ["bias"] > 0


def test_gaussian_mean_routes(rot2d):
    p = Polynomial.monomial((2, 2))
    assert sg.gaussian_mean(rot2d, p).mean == pytest.approx(0.25)
    from oulab.testfunctions import TanhLinear

    assert sg.gaussian_mean(rot2d, TanhLinear([1.0, 0.0])).mean == pytest.approx(0.0, abs=1e-12)
    m5 = build_model(-np.eye(5))
    est = sg.gaussian_mean(m5, TanhLinear(np.ones(5)), n=20_000)
    assert est.agrees(0.0, 4.0)


def test_invariance_and_ergodic_decay(sym1d):
    est = sg.invariance_check(sym1d, Polynomial.monomial((2,)), 1.0, 50_000, seed=5)
    assert est.agrees(0.0, 4.0)
    rows = sg.ergodic_limit(sym1d, Polynomial.linear([1.0]), [0.0, 1.0], 20_000, seed=5)
    assert rows[0]["norm_sq"].agrees(0.5, 4.0)
    assert rows[1]["norm_sq"].agrees(0.5 * math.exp(-2.0), 4.0)


def test_contractions_are_nonnegative(sym1d):
    f = Polynomial.linear([1.0])
    fk = sg.fk_contraction(sym1d, PotentialSpec(HalfSpace([1.0]), 0.1), f, 0.3, 5000, 0.02, seed=6)
    kl = sg.killed_contraction(sym1d, HalfSpace([1.0]), f, 0.3, 5000, 0.02, seed=6)
    assert fk.mean >= -4 * fk.std_error
    assert kl.mean >= -4 * kl.std_error


def test_mc_estimate_validation():
    with pytest.raises(ValueError):
        sg.McEstimate(0.0, -1.0, 10)
    with pytest.raises(ValueError):
        sg.McEstimate(0.0, 1.0, 0)
