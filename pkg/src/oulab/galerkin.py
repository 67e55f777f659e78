"""Gaussian-weighted grid discretization of the OU operators in d <= 2.

Scalar grid functions live on the nodes of a tensor grid, gradients on P1
elements (intervals in 1-D, two triangles per cell in 2-D), so ``D`` has no
checkerboard kernel.  Node and element weights discretize the invariant
Gaussian.  ``Dstar`` is the exact weighted adjoint of ``D`` and every operator
is built from ``D``, ``Dstar`` and ``B``::

    L   = -Dstar (I x B) D          (nodes)
    UL  = -D Dstar (I x B)          (element fields)
    Pi  = [[0, Dstar (I x B)], [D, 0]]

so the operator identities (accretivity, commutation ``D L = UL D``, the
block-diagonal ``Pi^2``, the weak form of the resolvent) hold to rounding.
The Dirichlet realization deletes the columns of exterior nodes (zero
extension) and keeps node weights unnormalized.

Dense spectral work is done in whitened coordinates ``f^ = W^{1/2} f`` where
weighted norms become Euclidean.  On the closure of the range of ``D`` we use
the orthonormal coordinates ``u = R f`` with ``R^T R = D^T W_v D`` (Cholesky),
in which ``UL`` is ``R L R^{-1}`` and ``Pi`` becomes ``[[0, -L R^{-1}], [R, 0]]``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import matkit
from .domains import PotentialSpec, WholeSpace
from .exceptions import CapabilityError, EmptyDomainError, NumericalError

__all__ = [
    "Grid",
    "GridOperator",
    "Realization",
    "build_grid",
    "assemble",
    "identity_residuals",
    "resolvent_estimates",
    "gradient_resolvent_bound",
    "ndr_bound",
    "riesz_constants",
    "bisectoriality_scan",
    "ScanReport",
    "poincare_gap",
    "PoincareResult",
    "chaos_spectrum",
    "hinf_norm_probe",
    "HinfReport",
    "default_family",
]

MAX_N = {1: 400, 2: 141}


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True, eq=False)
class Grid:
    axes: tuple  # per-dimension node coordinates
    nodes: np.ndarray  # (N, d), first axis varies slowest
    weights: np.ndarray  # (N,), sum 1
    mask: np.ndarray  # (N,) nodes inside the domain
    spacing: tuple
    R: float
    domain: object = None

    @property
    def dim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(a.size for a in self.axes)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]


def build_grid(m, dom=None, n_per_dim=200, R=5.0):
    """Uniform grid on ``prod_k [-R sigma_k, R sigma_k]`` with ``sigma_k^2 = Q_kk``."""
    d = m.d
    if d > 2:
        raise CapabilityError("grid discretization supports d <= 2; use Monte Carlo in higher dimensions")
    n = int(n_per_dim)
    if n < 3 or n > MAX_N[d]:
        raise ValueError(f"n_per_dim must lie in [3, {MAX_N[d]}] for d={d}")
    sig = np.sqrt(np.diag(m.Q))
    axes = tuple(np.linspace(-R * s, R * s, n) for s in sig)
    spacing = tuple(float(a[1] - a[0]) for a in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=1)
    dens = m.measure.pdf(nodes) * float(np.prod(spacing))
    weights = dens / dens.sum()
    dom = dom if dom is not None else WholeSpace(d)
    mask = np.asarray(dom.contains(nodes), dtype=bool)
    if not mask.any():
        raise EmptyDomainError("no grid node lies in the domain")
    return Grid(axes, nodes, weights, mask, spacing, float(R), dom)


def _elements(grid):
    """Sparse gradient ``D`` (fields x nodes), element centroids and volumes.

    Field index ``e * d + k`` holds component ``k`` on element ``e``.
    """
    d = grid.dim
    if d == 1:
        x = grid.axes[0]
        h = grid.spacing[0]
        ne = x.size - 1
        e = np.arange(ne)
        rows = np.concatenate([e, e])
        cols = np.concatenate([e, e + 1])
        vals = np.concatenate([-np.ones(ne), np.ones(ne)]) / h
        D = sp.csr_matrix((vals, (rows, cols)), shape=(ne, x.size))
        cent = (0.5 * (x[:-1] + x[1:]))[:, None]
        vol = np.full(ne, h)
        return D, cent, vol
    nx, ny = grid.shape
    hx, hy = grid.spacing
    x, y = grid.axes
    I, J = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    idx = lambda i, j: i * ny + j  # noqa: E731
    nc = I.size
    c = np.arange(nc)
    lower, upper = 2 * c, 2 * c + 1
    rows, cols, vals = [], [], []

    def add(el, comp, plus, minus, hstep):
        r = el * 2 + comp
        rows.extend([r, r])
        cols.extend([plus, minus])
        vals.extend([np.full(nc, 1.0 / hstep), np.full(nc, -1.0 / hstep)])

    # lower-left triangle (i,j),(i+1,j),(i,j+1)
    add(lower, 0, idx(I + 1, J), idx(I, J), hx)
    add(lower, 1, idx(I, J + 1), idx(I, J), hy)
    # upper-right triangle (i+1,j),(i,j+1),(i+1,j+1)
    add(upper, 0, idx(I + 1, J + 1), idx(I, J + 1), hx)
    add(upper, 1, idx(I + 1, J + 1), idx(I + 1, J), hy)
    D = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(4 * nc, nx * ny),
    )
    cent = np.empty((2 * nc, 2))
    cent[lower] = np.stack([x[I] + hx / 3, y[J] + hy / 3], axis=1)
    cent[upper] = np.stack([x[I] + 2 * hx / 3, y[J] + 2 * hy / 3], axis=1)
    vol = np.full(2 * nc, 0.5 * hx * hy)
    return D, cent, vol


# ---------------------------------------------------------------------------
# realizations


class Realization:
    """One realization of the operators (whole space or Dirichlet).

    Sparse matrices act in weighted coordinates; ``*_hat`` quantities and
    all dense matrices act in whitened coordinates.
    """

    def __init__(self, D, w, w_fields, B, d, deflate, mask=None):
        self.D = D.tocsr()
        self.w = w
        self.wv = w_fields
        self.d = d
        self.B = B
        self.deflate = deflate
        self.mask = mask
        n_el = D.shape[0] // d
        self.Bbig = sp.kron(sp.identity(n_el, format="csr"), sp.csr_matrix(B), format="csr")
        self.Dstar = (sp.diags(1.0 / w) @ self.D.T @ sp.diags(w_fields)).tocsr()
        self.L = -(self.Dstar @ self.Bbig @ self.D).tocsr()
        self.UL = -(self.D @ self.Dstar @ self.Bbig).tocsr()
        self.Dhat = (sp.diags(np.sqrt(w_fields)) @ self.D @ sp.diags(1.0 / np.sqrt(w))).tocsr()

    @property
    def n(self):
        return self.D.shape[1]

    @property
    def n_fields(self):
        return self.D.shape[0]

    # weighted inner products
    def ip(self, f, g):
        return float(np.sum(self.w * f * g))

    def ipv(self, F, G):
        return float(np.sum(self.wv * F * G))

    @cached_property
    def Lhat(self):
        """Dense whitened ``L``: ``-Dhat^T (I x B) Dhat``."""
        return -(self.Dhat.T @ self.Bbig @ self.Dhat).toarray()

    @cached_property
    def P(self):
        """Orthonormal basis of the complement of the kernel (``None`` if trivial)."""
        if not self.deflate:
            return None
        q = np.sqrt(self.w)
        q = q / np.linalg.norm(q)
        v = q.copy()
        v[0] -= 1.0
        nv = np.linalg.norm(v)
        H = np.eye(q.size)
        if nv > 1e-14:
            v /= nv
            H -= 2.0 * np.outer(v, v)
        return H[:, 1:]

    def _compress(self, M):
        P = self.P
        return M if P is None else P.T @ M @ P

    @cached_property
    def Lc(self):
        """``Lhat`` compressed to the kernel complement."""
        return self._compress(self.Lhat)

    @cached_property
    def K(self):
        return self._compress((self.Dhat.T @ self.Dhat).toarray())

    @cached_property
    def Rchol(self):
        """Upper ``R`` with ``R^T R = K`` so that ``||Dhat f|| = ||R f||``."""
        try:
            return np.linalg.cholesky(self.K).T
        except np.linalg.LinAlgError as exc:
            raise NumericalError("gradient Gram matrix is singular on the kernel complement") from exc

    @cached_property
    def ULc(self):
        """``UL`` in orthonormal coordinates of the range of ``D``: ``R Lc R^{-1}``."""
        R = self.Rchol
        # (R Lc) R^{-1} via a triangular solve with R^T
        return sla.solve_triangular(R, (R @ self.Lc).T, trans="T", lower=False).T

    @cached_property
    def Pi_blocks(self):
        """``(X, Y)`` with ``Pi = [[0, X], [Y, 0]]`` on ``nodes (+) range(D)``."""
        R = self.Rchol
        Rinv = np.linalg.inv(R)
        P = self.P
        if P is None:
            X = -self.Lhat @ Rinv
            Y = R
        else:
            X = -self.Lhat @ P @ Rinv
            Y = R @ P.T
        return X, Y

    @cached_property
    def Pi(self):
        X, Y = self.Pi_blocks
        n, k = X.shape
        out = np.zeros((n + k, n + k))
        out[:n, n:] = X
        out[n:, :n] = Y
        return out

    def Pi_sparse(self):
        """Field-level ``Pi`` in weighted coordinates (independent of the range coordinates)."""
        return sp.bmat([[None, self.Dstar @ self.Bbig], [self.D, None]], format="csr")


@dataclass(eq=False)
class GridOperator:
    model: object
    grid: Grid
    D: sp.csr_matrix  # gradient on all nodes
    centroids: np.ndarray
    w_elements: np.ndarray
    whole: Realization
    dirichlet: Realization

    def realization(self, which):
        if which == "whole":
            return self.whole
        if which == "dirichlet":
            return self.dirichlet
        raise ValueError(f"unknown realization {which!r}")

    @property
    def Dstar(self):
        return self.whole.Dstar

    @property
    def L_h(self):
        return self.whole.L

    @property
    def L_Omega_h(self):
        return self.dirichlet.L

    @property
    def UL_h(self):
        return self.dirichlet.UL

    @property
    def Pi_h(self):
        return self.dirichlet.Pi_sparse()

    def restrict(self, f):
        return np.asarray(f)[self.grid.mask]

    def extend(self, f_inner):
        out = np.zeros(self.grid.n_nodes)
        out[self.grid.mask] = f_inner
        return out


def assemble(m, grid):
    """Assemble both realizations of the grid operators for model ``m``."""
    D, cent, vol = _elements(grid)
    d = grid.dim
    we = m.measure.pdf(cent) * vol
    we = we / we.sum()
    wv = np.repeat(we, d)
    whole = Realization(D, grid.weights, wv, m.B, d, deflate=True)
    mask = grid.mask
    dirichlet = Realization(D[:, mask], grid.weights[mask], wv, m.B, d, deflate=False, mask=mask)
    return GridOperator(m, grid, D.tocsr(), cent, we, whole, dirichlet)


# ---------------------------------------------------------------------------
# identities


def _rel(num, den):
    return float(num / max(den, 1e-300))


def identity_residuals(op, which="dirichlet", *, seed=0, n_probe=3, ts=(0.1, 1.0, 10.0), lam=1.0):
    """Relative residuals of the exact matrix identities on random probes.

    All checks use the sparse weighted-coordinate matrices, independently of
    the dense range coordinates.
    """
    r = op.realization(which)
    rng = np.random.default_rng(seed)
    n, nf = r.n, r.n_fields
    out = {k: 0.0 for k in ("accretivity", "duality", "commutation", "pi_square", "resolvent_commutation",
                            "weak_form")}
    if which == "whole":
        out["kernel"] = float(np.abs(r.L @ np.ones(n)).max())
    I_n = sp.identity(n, format="csc")
    I_f = sp.identity(nf, format="csc")
    Pi = r.Pi_sparse()
    lu_lam = spla.splu((lam * I_n - r.L).tocsc())
    lus = {t: (spla.splu((I_n - t * r.L).tocsc()), spla.splu((I_f - t * r.UL).tocsc())) for t in ts}
    for _ in range(n_probe):
        f = rng.standard_normal(n)
        g = rng.standard_normal(n)
        G = rng.standard_normal(nf)
        Df, Dg = r.D @ f, r.D @ g
        Lf = r.L @ f
        # <-L f, f>_w = 1/2 ||D f||^2
        a = -r.ip(Lf, f)
        out["accretivity"] = max(out["accretivity"], _rel(abs(a - 0.5 * r.ipv(Df, Df)), r.ipv(Df, Df)))
        # <L f, g>_w + <(I x B) D f, D g>_w = 0
        form = r.ipv(r.Bbig @ Df, Dg)
        scale = math.sqrt(r.ipv(Df, Df) * r.ipv(Dg, Dg))
        out["duality"] = max(out["duality"], _rel(abs(r.ip(Lf, g) + form), scale))
        # D L f = UL D f
        lhs, rhs = r.D @ Lf, r.UL @ Df
        out["commutation"] = max(out["commutation"], _rel(np.linalg.norm(lhs - rhs), np.linalg.norm(lhs)))
        # Pi^2 = diag(-L, -UL)
        v = np.concatenate([f, G])
        sq = Pi @ (Pi @ v)
        ref = np.concatenate([-Lf, -(r.UL @ G)])
        out["pi_square"] = max(out["pi_square"], _rel(np.linalg.norm(sq - ref), np.linalg.norm(ref)))
        # D (I - tL)^{-1} f = (I - tUL)^{-1} D f
        for t in ts:
            lu_n, lu_f = lus[t]
            a1 = r.D @ lu_n.solve(f)
            a2 = lu_f.solve(Df)
            out["resolvent_commutation"] = max(out["resolvent_commutation"],
                                               _rel(np.linalg.norm(a1 - a2), np.linalg.norm(a1)))
        # weak form: lam <phi, v> + <(I x B) D phi, D v> - <f, v> = 0 for all v
        phi = lu_lam.solve(f)
        resid = r.w * (lam * phi - f) + r.D.T @ (r.wv * (r.Bbig @ (r.D @ phi)))
        out["weak_form"] = max(out["weak_form"], _rel(np.linalg.norm(resid), np.linalg.norm(r.w * f)))
    return out


# ---------------------------------------------------------------------------
# resolvent estimates with a penalization potential


def resolvent_estimates(op, eps, lam, fs):
    """Ratios of the four penalized resolvent quantities to their bounds.

    For ``phi = (lam - L + V/eps)^{-1} f`` on the whole-space realization,
    with ``V = V_eps`` of the grid's domain (nodes for the zero-order term,
    element centroids for the gradient term), returns one row per ``f`` with
    ``measured / bound`` for (R), (DR), (VR), (DV); each must be <= 1.
    """
    r = op.whole
    spec = PotentialSpec(op.grid.domain, eps)
    Vn = spec(op.grid.nodes)
    Ve = np.repeat(spec(op.centroids), op.grid.dim)
    A = (lam * sp.identity(r.n) - r.L + sp.diags(Vn / eps)).tocsc()
    lu = spla.splu(A)
    rows = []
    for f in fs:
        f = np.asarray(f, dtype=float)
        phi = lu.solve(f)
        Dphi = r.D @ phi
        nf2 = r.ip(f, f)
        meas = {
            "R": math.sqrt(r.ip(phi, phi)),
            "DR": r.ipv(Dphi, Dphi),
            "VR": r.ip(Vn * phi, phi),
            "DV": r.ipv(Ve * Dphi, Dphi),
        }
        bound = {
            "R": math.sqrt(nf2) / lam,
            "DR": 2.0 / lam * nf2,
            "VR": eps / lam * nf2,
            "DV": math.sqrt(eps / lam) * nf2,
        }
        rows.append({"lam": lam, "eps": eps, "measured": meas, "bound": bound,
                     "ratio": {k: meas[k] / bound[k] for k in meas}})
    return rows


# ---------------------------------------------------------------------------
# resolvent gradient bounds


def _norm2(M):
    return float(np.linalg.norm(M, 2))


def _resolvent_gradient_norm(r, alpha, beta, gamma):
    """``|alpha| ||R (beta I - gamma Lc)^{-1}||``, equal to the weighted norm of ``alpha D (beta - gamma L)^{-1}``."""
    Lc = r.Lc
    Id = np.eye(Lc.shape[0])
    return abs(alpha) * _norm2(r.Rchol @ np.linalg.solve(beta * Id - gamma * Lc, Id))


def gradient_resolvent_bound(op, lams, which="dirichlet"):
    """``max_lam sqrt(lam) ||D (lam - L)^{-1}||`` in weighted norms, with per-lambda rows."""
    r = op.realization(which)
    rows = [(float(lam), _resolvent_gradient_norm(r, math.sqrt(lam), lam, 1.0)) for lam in lams]
    return max(v for _, v in rows), rows


def ndr_bound(op, ts, which="dirichlet"):
    """``sup_t ||t D (I - t^2 L)^{-1}||`` in weighted norms, with per-t rows."""
    r = op.realization(which)
    rows = []
    for t in ts:
        t = abs(float(t))
        rows.append((t, _resolvent_gradient_norm(r, t, 1.0, t * t)))
    return max(v for _, v in rows), rows


# ---------------------------------------------------------------------------
# Riesz constants


def riesz_constants(op, which="dirichlet", *, tol=1e-7):
    """Extremes ``(c, C)`` of ``||(-L)^{1/2} f|| / ||D f||`` on the kernel complement.

    Solved as the generalized symmetric eigenproblem ``S^T S v = mu K v`` with
    ``S`` the principal square root of ``-L`` and ``K = D^T W D``.
    """
    r = op.realization(which)
    S = matkit.sqrtm_principal(-r.Lc, tol=tol)
    G = S.T @ S
    G = 0.5 * (G + G.T)
    mu = sla.eigh(G, r.K, eigvals_only=True)
    if mu[0] <= 0:
        raise NumericalError("non-positive Riesz eigenvalue")
    return float(math.sqrt(mu[0])), float(math.sqrt(mu[-1]))


# ---------------------------------------------------------------------------
# bisectoriality


@dataclass
class ScanReport:
    rows: list  # dicts per t
    sup_plain: float
    sup_energy: float
    max_formula_error: float
    singular: list = field(default_factory=list)


def _energy_scaling(n, k):
    return np.concatenate([np.ones(n), np.full(k, math.sqrt(0.5))])


def bisectoriality_scan(op, t_grid, which="dirichlet"):
    """``||(I - i t Pi)^{-1}||`` over ``t_grid`` in the plain and energy norms.

    The energy norm is ``||f||^2 + 1/2 ||G||^2``, in which ``Pi`` is
    selfadjoint when ``B = I/2``.  Each inverse is compared blockwise with the
    resolvent matrix ``[[(I - t^2 L)^{-1}, i t (I - t^2 L)^{-1} X],
    [i t Y (I - t^2 L)^{-1}, (I - t^2 UL)^{-1}]]``.
    """
    r = op.realization(which)
    X, Y = r.Pi_blocks
    n, k = X.shape
    Pi = r.Pi
    Lfull = -X @ Y  # -L on the node block (compressed on the kernel complement for the whole space)
    UL = -Y @ X
    s = _energy_scaling(n, k)
    rows, singular = [], []
    sup_p = sup_e = err_max = 0.0
    I2 = np.eye(n + k)
    In, Ik = np.eye(n), np.eye(k)
    for t in t_grid:
        t = float(t)
        M = I2 - 1j * t * Pi
        try:
            Minv = np.linalg.solve(M, I2.astype(complex))
        except np.linalg.LinAlgError:
            singular.append(t)
            continue
        if not np.all(np.isfinite(Minv)):
            singular.append(t)
            continue
        A11 = np.linalg.solve(In - t * t * Lfull, In)
        A22 = np.linalg.solve(Ik - t * t * UL, Ik)
        blocks = {
            "11": (Minv[:n, :n], A11),
            "12": (Minv[:n, n:], 1j * t * A11 @ X),
            "21": (Minv[n:, :n], 1j * t * Y @ A11),
            "22": (Minv[n:, n:], A22),
        }
        err = max(_norm2(a - b) / max(_norm2(b), 1e-300) for a, b in blocks.values())
        plain = _norm2(Minv)
        energy = _norm2(s[:, None] * Minv / s[None, :])
        row = {"t": t, "norm": plain, "energy_norm": energy, "formula_error": err}
        row.update({f"block{key}": _norm2(a) for key, (a, _) in blocks.items()})
        rows.append(row)
        sup_p, sup_e, err_max = max(sup_p, plain), max(sup_e, energy), max(err_max, err)
    return ScanReport(rows, sup_p, sup_e, err_max, singular)


# ---------------------------------------------------------------------------
# Poincare


@dataclass
class PoincareResult:
    mode: str
    gap: float
    variance_constant: float  # 1 / (2 gap): smallest C with ||f||^2 <= C ||D f||^2 (mean-zero or Dirichlet)
    semigroup_constant: float  # M^2 / (2 w)
    semigroup_rate: float  # 2 w / M^2


def poincare_gap(op, mode="whole_meanzero"):
    """Spectral gap of ``-L``.

    ``whole_meanzero``: smallest eigenvalue of the symmetric part on the
    complement of constants (which equals ``D^T W D / 2`` there, so the
    variance constant is ``1 / (2 gap)``); ``dirichlet``: smallest real part
    of the spectrum of ``-L_Omega``.
    """
    m = op.model
    if mode == "whole_meanzero":
        Lc = op.whole.Lc
        gap = float(np.linalg.eigvalsh(-0.5 * (Lc + Lc.T))[0])
        var = 1.0 / (2.0 * gap)
    elif mode == "dirichlet":
        r = op.dirichlet
        gap = float(np.min(np.linalg.eigvals(-r.Lc).real))
        Lc = r.Lc
        sym = float(np.linalg.eigvalsh(-0.5 * (Lc + Lc.T))[0])
        var = 1.0 / (2.0 * sym)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return PoincareResult(mode, gap, var, m.M**2 / (2.0 * m.w), 2.0 * m.w / m.M**2)


# ---------------------------------------------------------------------------
# chaos spectrum


def chaos_spectrum(m, N):
    """``{sum_k n_k lambda_k(A) : sum n_k <= N}`` with multiplicity, sorted by (real, imag).

    This is the spectrum of the generator on Wiener chaos up to order ``N``.
    """
    if not 0 <= N <= 6:
        raise ValueError("chaos order must lie in [0, 6]")
    lam = np.linalg.eigvals(m.A)
    d = lam.size
    vals = []
    for total in range(N + 1):
        for combo in itertools.combinations_with_replacement(range(d), total):
            vals.append(sum((lam[i] for i in combo), 0j))
    vals = np.array(vals)
    vals = np.where(np.abs(vals.imag) < 1e-12, vals.real + 0j, vals)
    order = np.lexsort((vals.imag, -vals.real))
    return vals[order]


# ---------------------------------------------------------------------------
# H-infinity probe


def default_family(s_values=None, bumps=((0.5, 0.5), (1.0, 1.0), (0.5, 1.0), (1.0, 0.5), (2.0, 1.0))):
    """Imaginary powers ``z^{is}`` and rational bumps ``(z/(1+z))^a (1/(1+z))^b``."""
    if s_values is None:
        s_values = np.linspace(-5.0, 5.0, 11)
    fam = []
    for s in s_values:
        s = float(s)
        fam.append((f"z^(i*{s:g})", lambda z, s=s: np.exp(1j * s * np.log(z)), ("power", s)))
    for a, b in bumps:
        fam.append((f"bump({a:g},{b:g})", lambda z, a=a, b=b: (z / (1 + z)) ** a * (1 / (1 + z)) ** b,
                    ("bump", a, b)))
    return fam


def _sector_sup(f, kind, theta):
    if kind[0] == "power":
        return math.exp(abs(kind[1]) * theta)
    r = np.logspace(-8, 8, 4001)
    z = np.concatenate([r * np.exp(1j * theta), r * np.exp(-1j * theta), r])
    return float(np.abs(f(z)).max())


@dataclass
class HinfReport:
    value: float  # max over the family of ||f(T)|| / sup_sector |f|
    raw: float  # max over the family of ||f(T)||
    theta: float
    method: str
    rows: list


def _contour_apply(T, f, theta, lam, tol=1e-6):
    """``f(T)`` by the Cauchy integral over the boundary of an annular sector enclosing the spectrum."""
    mods = np.abs(lam)
    r0, r1 = 0.5 * mods.min(), 2.0 * mods.max()
    phi = theta
    n = T.shape[0]
    Id = np.eye(n)

    def integral(m):
        x, wq = np.polynomial.legendre.leggauss(m)
        acc = np.zeros((n, n), dtype=complex)
        # log-spaced rays, then arcs; counter-clockwise
        lr0, lr1 = math.log(r0), math.log(r1)
        lr = 0.5 * (lr1 - lr0) * (x + 1) + lr0
        jr = 0.5 * (lr1 - lr0) * np.exp(lr)
        for sgn, direction in ((-1, 1), (1, -1)):
            z = np.exp(lr) * np.exp(1j * sgn * phi)
            dz = jr * np.exp(1j * sgn * phi) * direction
            for zi, dzi, wi in zip(z, dz, wq):
                acc += wi * f(zi) * dzi * np.linalg.solve(zi * Id - T, Id)
        ang = phi * x
        for rad, direction in ((r1, 1), (r0, -1)):
            z = rad * np.exp(1j * ang)
            dz = 1j * z * phi * direction
            for zi, dzi, wi in zip(z, dz, wq):
                acc += wi * f(zi) * dzi * np.linalg.solve(zi * Id - T, Id)
        return acc / (2j * math.pi)

    m = 32
    prev = integral(m)
    while m < 1024:
        m *= 2
        cur = integral(m)
        if _norm2(cur - prev) <= tol * max(1.0, _norm2(cur)):
            return cur
        prev = cur
    raise NumericalError("contour quadrature did not reach the requested tolerance")


def hinf_norm_probe(op, theta=None, family=None, which="dirichlet", *, cond_limit=1e8, T=None):
    """Probe ``||f(-UL)||`` on the range of ``D`` over a family of bounded holomorphic functions.

    ``T`` overrides the operator (a dense matrix whose spectrum lies in the
    open right half-plane).  The default sector angle is halfway between the
    spectral angle and ``pi/2``.  This measures a discretized quantity; it
    does not certify a functional calculus.
    """
    if T is None:
        r = op.realization(which)
        T = -r.ULc
    T = np.asarray(T)
    lam, V = np.linalg.eig(T)
    if np.any(lam.real <= 0):
        raise NumericalError("probe operator must have spectrum in the open right half-plane")
    omega = float(np.abs(np.angle(lam)).max())
    if theta is None:
        theta = 0.5 * (omega + 0.5 * math.pi)
    if not omega <= theta < math.pi:
        raise ValueError(f"sector angle {theta:g} must contain the spectral angle {omega:g}")
    family = family or default_family()
    cond = float(np.linalg.cond(V))
    method = "diagonalization" if cond < cond_limit else "contour"
    Vinv = np.linalg.inv(V) if method == "diagonalization" else None
    rows = []
    for name, f, kind in family:
        if method == "diagonalization":
            FT = (V * f(lam)) @ Vinv
        else:
            FT = _contour_apply(T, f, 0.5 * (omega + theta), lam)
        nrm = _norm2(FT)
        sup = _sector_sup(f, kind, theta)
        rows.append({"f": name, "norm": nrm, "sector_sup": sup, "spectrum_sup": float(np.abs(f(lam)).max()),
                     "ratio": nrm / sup})
    return HinfReport(max(r["ratio"] for r in rows), max(r["norm"] for r in rows), float(theta), method, rows)
