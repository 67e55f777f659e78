import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from oulab import galerkin
from oulab.domains import Ball, Complement, HalfSpace
from oulab.exceptions import CapabilityError, EmptyDomainError
from oulab.model import build_model

SQ2 = 1 / math.sqrt(2)


@pytest.fixture(scope="module")
def half_line(sym1d):
    return galerkin.assemble(sym1d, galerkin.build_grid(sym1d, HalfSpace([1.0]), 201, 5.0))


@pytest.fixture(scope="module")
def rot_small(rot2d):
    return galerkin.assemble(rot2d, galerkin.build_grid(rot2d, HalfSpace([0.0, 1.0]), 17, 5.0))


def test_grid_guards(sym1d):
    with pytest.raises(CapabilityError):
        galerkin.build_grid(build_model(-np.eye(3)), None, 10)
    with pytest.raises(EmptyDomainError):
        galerkin.build_grid(sym1d, HalfSpace([1.0], 100.0), 50)
    with pytest.raises(ValueError):
        galerkin.build_grid(sym1d, None, 2)


def test_weights_are_probability(half_line):
    assert half_line.grid.weights.sum() == pytest.approx(1.0)
    assert half_line.w_elements.sum() == pytest.approx(1.0)
    assert half_line.grid.mask.sum() == 100  # nodes strictly right of 0


@pytest.mark.parametrize("which", ["whole", "dirichlet"])
def test_identities_1d(half_line, which):
    res = galerkin.identity_residuals(half_line, which)
    assert max(res.values()) <= 1e-8


@pytest.mark.parametrize("which", ["whole", "dirichlet"])
def test_identities_rotation(rot_small, which):
    res = galerkin.identity_residuals(rot_small, which)
    assert max(res.values()) <= 1e-8


def test_L_is_minus_Dstar_B_D(rot_small):
    r = rot_small.dirichlet
    diff = r.L + r.Dstar @ r.Bbig @ r.D
    assert abs(diff).max() == 0.0


def test_dirichlet_spectrum_is_odd_hermite(half_line):
    ev = np.sort(np.linalg.eigvals(-half_line.dirichlet.Lc).real)
    # odd Hermite functions: 1, 3, 5, ...
    assert ev[:3] == pytest.approx([1.0, 3.0, 5.0], rel=2e-2)
    assert ev[0] == pytest.approx(1.0, rel=1e-4)


def test_whole_space_spectrum_matches_chaos(sym1d):
    op = galerkin.assemble(sym1d, galerkin.build_grid(sym1d, None, 200, 6.0))
    ev = np.sort(np.linalg.eigvals(-op.whole.Lc).real)[:4]
    chaos = np.sort(-galerkin.chaos_spectrum(sym1d, 4).real)[1:5]
    assert ev == pytest.approx(chaos, rel=1e-3)


def test_chaos_spectrum_conjugate_pairs(rot2d):
    z = galerkin.chaos_spectrum(rot2d, 2)
    assert z[0] == 0
    assert sorted(map(complex, z[1:3]), key=lambda v: v.imag) == [complex(-1, -1), complex(-1, 1)]
    nonreal = z[np.abs(z.imag) > 1e-12]
    assert np.allclose(np.sort_complex(nonreal), np.sort_complex(nonreal.conj()))
    with pytest.raises(ValueError):
        galerkin.chaos_spectrum(rot2d, 7)


def test_poincare_gaps(half_line, sym1d):
    assert galerkin.poincare_gap(half_line, "dirichlet").gap == pytest.approx(1.0, rel=2e-2)
    op = galerkin.assemble(sym1d, galerkin.build_grid(sym1d, None, 200, 6.0))
    res = galerkin.poincare_gap(op, "whole_meanzero")
    assert res.gap == pytest.approx(1.0, rel=2e-2)
    assert res.semigroup_constant == pytest.approx(0.5)
    for dom in (Ball([0.0], 1.0), Complement(Ball([0.0], 1.0))):
        op2 = galerkin.assemble(sym1d, galerkin.build_grid(sym1d, dom, 201, 5.0))
        assert galerkin.poincare_gap(op2, "dirichlet").gap > 0


def test_riesz_symmetric_exact(half_line):
    for which in ("whole", "dirichlet"):
        c, C = galerkin.riesz_constants(half_line, which)
        assert c == pytest.approx(SQ2, abs=1e-6)
        assert C == pytest.approx(SQ2, abs=1e-6)


def test_riesz_rotation_positive(rot_small):
    c, C = galerkin.riesz_constants(rot_small)
    assert 0 < c <= C < math.inf


def test_gradient_resolvent_bounds(half_line, rot_small):
    for op in (half_line, rot_small):
        gr, _ = galerkin.gradient_resolvent_bound(op, np.logspace(-2, 2, 9))
        ndr, _ = galerkin.ndr_bound(op, np.logspace(-3, 3, 13))
        assert gr <= math.sqrt(2) + 1e-6
        assert ndr <= 2 + 1e-6


def test_resolvent_estimates_ratio_below_one(rot_small):
    rng = np.random.default_rng(0)
    fs = [rng.standard_normal(rot_small.whole.n) for _ in range(3)]
    for lam in (0.5, 4.0):
        for r in galerkin.resolvent_estimates(rot_small, 0.1, lam, fs):
            assert max(r["ratio"].values()) <= 1 + 1e-8


def test_bisector_scan(half_line, rot_small):
    rep = galerkin.bisectoriality_scan(half_line, np.logspace(-3, 3, 13))
    assert rep.sup_energy <= 1 + 1e-8
    assert rep.sup_plain == pytest.approx(3 / (2 * math.sqrt(2)), rel=1e-3)
    assert rep.max_formula_error <= 1e-8
    rep2 = galerkin.bisectoriality_scan(rot_small, np.logspace(-3, 3, 13))
    assert not rep2.singular and math.isfinite(rep2.sup_plain)
    assert rep2.max_formula_error <= 1e-8


def test_pi_square_is_block_diagonal(rot_small):
    r = rot_small.dirichlet
    P2 = (r.Pi_sparse() @ r.Pi_sparse()).toarray()
    n = r.n
    assert np.abs(P2[:n, n:]).max() == 0 and np.abs(P2[n:, :n]).max() == 0
    assert np.allclose(P2[:n, :n], -r.L.toarray())


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_accretivity_random_vectors(seed):
    m = build_model([[-1.0, -1.0], [1.0, -1.0]])
    op = galerkin.assemble(m, galerkin.build_grid(m, HalfSpace([0.0, 1.0]), 9, 4.0))
    r = op.dirichlet
    f = np.random.default_rng(seed).standard_normal(r.n)
    assert -r.ip(r.L @ f, f) >= -1e-12


def test_hinf_probe_routes_agree():
    rng = np.random.default_rng(3)
    T = np.diag([0.5, 1.0, 3.0]) + np.triu(rng.standard_normal((3, 3)), 1) * 0.3
    diag = galerkin.hinf_norm_probe(None, T=T)
    cont = galerkin.hinf_norm_probe(None, T=T, cond_limit=0.0)
    assert diag.method == "diagonalization" and cont.method == "contour"
    for a, b in zip(diag.rows, cont.rows):
        assert a["norm"] == pytest.approx(b["norm"], rel=1e-4)


def test_hinf_probe_selfadjoint_is_bounded_by_sup(half_line):
    rep = galerkin.hinf_norm_probe(half_line)
    assert rep.value <= 1 + 1e-8
    assert rep.method == "diagonalization"


def test_restrict_extend_round_trip(half_line):
    f = np.arange(half_line.grid.n_nodes, dtype=float)
    g = half_line.extend(half_line.restrict(f))
    assert np.array_equal(g[half_line.grid.mask], f[half_line.grid.mask])
    assert np.all(g[~half_line.grid.mask] == 0)


def test_whole_realization_kernel_is_constants(half_line):
    r = half_line.whole
    assert np.abs(r.L @ np.ones(r.n)).max() <= 1e-10
    lu = spla.splu(sp.csc_matrix(np.eye(r.n) - r.L.toarray()))
    assert np.allclose(lu.solve(np.ones(r.n)), 1.0)
