import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oulab.domains import (
    Ball,
    Box,
    Complement,
    HalfSpace,
    PotentialSpec,
    WholeSpace,
    domain_from_spec,
    mu_mass,
)
from oulab.exceptions import ConfigError
from oulab.model import build_model

coords = st.floats(-5.0, 5.0, allow_nan=False)


def test_distance_closed_forms():
    hs = HalfSpace([0.0, 2.0], 1.0)  # y > 1/2
    assert hs.dist_to_complement([0.3, 2.0]) == pytest.approx(1.5)
    assert hs.dist_to_complement([0.3, 0.0]) == 0.0
    b = Ball([1.0, 0.0], 2.0)
    assert b.dist_to_complement([1.5, 0.0]) == pytest.approx(1.5)
    box = Box([0.0, 0.0], [2.0, 1.0])
    assert box.dist_to_complement([0.5, 0.2]) == pytest.approx(0.2)
    assert box.dist_to_complement([3.0, 0.2]) == 0.0
    assert WholeSpace(2).dist_to_complement([1.0, 1.0]) == math.inf


@settings(max_examples=60, deadline=None)
@given(coords, coords, st.floats(0.01, 1.0))
def test_potential_range_and_support(x, y, eps):
    for dom in (HalfSpace([1.0, 1.0], 0.3), Ball([0.0, 0.0], 2.0), Box([-1, -1], [1.5, 2.0]),
                Complement(Ball([0.0, 0.0], 1.0))):
        V = PotentialSpec(dom, eps)
        p = np.array([x, y])
        v = V(p)
        assert 0.0 <= v <= 1.0
        sd = dom.signed_distance(p)
        if sd <= 0:
            assert v == pytest.approx(1.0)
        if sd > eps + 1e-12 and not V.shrunk_empty:
            assert v == 0.0


@settings(max_examples=40, deadline=None)
@given(coords, st.floats(0.01, 1.0))
def test_potential_is_lipschitz_in_x(x, eps):
    dom = Ball([0.0], 2.0)
    V = PotentialSpec(dom, eps)
    dx = 1e-4
    assert abs(V([x + dx]) - V([x])) <= dx / eps + 1e-12


def test_empty_shrink_gives_constant_potential():
    V = PotentialSpec(Ball([0.0, 0.0], 0.05), 0.1)
    assert V.shrunk_empty
    assert np.all(V(np.zeros((3, 2))) == 1.0)
    assert math.isinf(Ball([0.0], 0.05).dist_to_shrunk([0.0], 0.1))


def test_box_shrink_is_inset():
    box = Box([0.0, 0.0], [2.0, 2.0])
    assert box.dist_to_shrunk([1.0, 1.0], 0.5) == 0.0
    assert box.dist_to_shrunk([0.2, 1.0], 0.5) == pytest.approx(0.3)
    assert box.dist_to_shrunk([0.2, 0.2], 0.5) == pytest.approx(0.3 * math.sqrt(2))


def test_mu_mass_exact_and_quadrature_routes():
    m1 = build_model([[-1.0]])
    assert mu_mass(HalfSpace([1.0]), m1).mean == pytest.approx(0.5)
    # interval (-1, 1) under N(0, 1/2)
    assert mu_mass(Ball([0.0], 1.0), m1).mean == pytest.approx(math.erf(1.0), abs=1e-12)
    assert mu_mass(Complement(Ball([0.0], 1.0)), m1).mean == pytest.approx(1 - math.erf(1.0), abs=1e-12)
    m2 = build_model([[-1.0, -1.0], [1.0, -1.0]])
    assert mu_mass(HalfSpace([0.0, 1.0]), m2).mean == pytest.approx(0.5)
    # disc of radius r under N(0, I/2): 1 - exp(-r^2)
    q = mu_mass(Ball([0.0, 0.0], 1.0), m2, resolution=256)
    assert q.mean == pytest.approx(1 - math.exp(-1.0), abs=5e-3)
    mc = mu_mass(Ball([0.0, 0.0], 1.0), m2, method="monte_carlo", n=100_000, seed=3)
    assert abs(mc.mean - (1 - math.exp(-1.0))) <= 4 * mc.std_error


def test_spec_round_trip_and_errors():
    for dom in (HalfSpace([0.0, 1.0], 0.5), Ball([1.0, 2.0], 0.5), Box([0, 0], [1, 1]),
                Complement(Ball([0.0, 0.0], 1.0)), WholeSpace(2)):
        again = domain_from_spec(dom.to_spec())
        pts = np.random.default_rng(0).standard_normal((50, 2))
        assert np.array_equal(again.contains(pts), dom.contains(pts))
    with pytest.raises(ConfigError):
        domain_from_spec({"kind": "torus"})
    with pytest.raises(ConfigError):
        domain_from_spec({"kind": "ball", "center": [0.0]})
    with pytest.raises(ValueError):
        HalfSpace([0.0, 0.0])
    with pytest.raises(ValueError):
        Box([1.0], [0.0])
