"""Dense real-matrix kernel.

Thin, validated wrappers around LAPACK-backed routines: matrix exponentials,
continuous Lyapunov solves, principal square roots, resolvents, spectra and
spectral norms.  Every function is pure; tolerances are keyword arguments so
that the worse-conditioned grid operators can relax them per call.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import NearSingularError, NumericalError, SectorialityError, StabilityError

__all__ = [
    "Spectrum",
    "as_matrix",
    "expm",
    "solve_lyapunov",
    "sqrtm_principal",
    "resolvent",
    "op_norm",
    "spectrum",
    "spectral_abscissa",
]


def as_matrix(M, *, square=False, name="M"):
    """Return ``M`` as a finite 2-D float array, raising ``ValueError`` otherwise."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] == 0 or M.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    if square and M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray  # complex, sorted by (real, imag)
    condition: float  # condition number of the eigenvector matrix

    @property
    def abscissa(self) -> float:
        return float(np.max(self.eigenvalues.real))

    def pairs(self):
        return [(float(z.real), float(z.imag)) for z in self.eigenvalues]


def spectrum(M) -> Spectrum:
    M = as_matrix(M, square=True)
    vals, vecs = np.linalg.eig(M)
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    # real input: make conjugate pairs exact
    vals = np.where(np.abs(vals.imag) < 1e-14 * max(1.0, np.abs(vals).max()), vals.real + 0j, vals)
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(vecs))
    return Spectrum(vals, cond if np.isfinite(cond) else np.inf)


def spectral_abscissa(M) -> float:
    return float(np.max(np.linalg.eigvals(as_matrix(M, square=True)).real))


def expm(M, t=1.0):
    """Matrix exponential ``exp(t M)`` by scaling and squaring with a Pade approximant."""
    M = as_matrix(M, square=True)
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    return sla.expm(t * M)


def _lyapunov_kronecker(A):
    d = A.shape[0]
    eye = np.eye(d)
    # vec(A X + X A^T) = (I (x) A + A (x) I) vec(X), column-major vec
    K = np.kron(eye, A) + np.kron(A, eye)
    try:
        x = np.linalg.solve(K, -eye.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Kronecker Lyapunov system is singular") from exc
    return x.reshape(d, d, order="F")


def solve_lyapunov(A, *, method="schur", tol=1e-10):
    """Solve ``A Q + Q A^T = -I`` for the invariant covariance ``Q``.

    ``method="schur"`` is the Bartels-Stewart solver (production path);
    ``method="kronecker"`` forms the ``d^2 x d^2`` system directly and is
    intended as an independent oracle for small ``d``.
    """
    A = as_matrix(A, square=True, name="A")
    d = A.shape[0]
    eigs = np.linalg.eigvals(A)
    worst = eigs[np.argmax(eigs.real)]
    if worst.real >= 0:
        raise StabilityError(
            f"drift is not stable: eigenvalue {worst:.6g} has real part >= 0", eigenvalue=complex(worst)
        )
    if method == "schur":
        Q = sla.solve_continuous_lyapunov(A, -np.eye(d))
    elif method == "kronecker":
        Q = _lyapunov_kronecker(A)
    else:
        raise ValueError(f"unknown method {method!r}")
    Q = 0.5 * (Q + Q.T)
    resid = np.linalg.norm(A @ Q + Q @ A.T + np.eye(d))
    if not np.isfinite(resid) or resid > tol * d * max(1.0, np.linalg.norm(Q)):
        raise NumericalError(f"Lyapunov residual {resid:.3e} exceeds tolerance")
    return Q


def sqrtm_principal(M, *, tol=1e-9, sector_tol=1e-12):
    """Principal square root via a Schur decomposition and triangular recurrence.

    Raises ``SectorialityError`` if an eigenvalue lies on the closed negative
    real axis (within ``sector_tol`` relative to the spectral radius).
    """
    M = as_matrix(M, square=True)
    eigs = np.linalg.eigvals(M)
    scale = max(np.abs(eigs).max(), 1e-300)
    bad = (eigs.real <= sector_tol * scale) & (np.abs(eigs.imag) <= sector_tol * scale)
    if np.any(bad):
        raise SectorialityError(f"eigenvalue {eigs[bad][0]:.3g} on the closed negative real axis")
    R = sla.sqrtm(M)
    if np.iscomplexobj(R):
        # principal root of a real matrix is real
        if np.abs(R.imag).max() > 1e-8 * max(1.0, np.abs(R.real).max()):
            raise NumericalError("principal square root unexpectedly complex")
        R = R.real
    err = np.linalg.norm(R @ R - M) / max(np.linalg.norm(M), 1e-300)
    if err > tol:
        raise NumericalError(f"square-root residual {err:.3e} exceeds {tol:.1e}")
    return R


def resolvent(M, z, *, tol=1e-10, gap=1e-12):
    """Return ``(z I - M)^{-1}`` (complex)."""
    M = as_matrix(M, square=True)
    n = M.shape[0]
    eigs = np.linalg.eigvals(M)
    if np.min(np.abs(eigs - z)) <= gap * max(1.0, np.abs(eigs).max()):
        raise NearSingularError(f"z={z} lies within {gap:g} of the spectrum")
    T = z * np.eye(n) - M
    X = np.linalg.solve(T, np.eye(n, dtype=complex))
    resid = np.linalg.norm(T @ X - np.eye(n), 2)
    if resid > tol:
        raise NumericalError(f"resolvent residual {resid:.3e} exceeds {tol:.1e}")
    return X


def op_norm(M) -> float:
    """Spectral norm (largest singular value)."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))
