"""Open convex domains, their complements, exact distances and penalization potentials.

Every domain exposes a signed distance ``sd(x)``: positive inside, equal to the
distance to the complement there, and minus the distance to the closure
outside.  Shrunk sets ``{x in D : d(x, complement) > eps}`` and the ramp
potentials ``min(d(x, D_eps) / eps, 1)`` are computed in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .exceptions import ConfigError

__all__ = [
    "Domain",
    "HalfSpace",
    "Ball",
    "Box",
    "Complement",
    "WholeSpace",
    "PotentialSpec",
    "contains",
    "dist_to_complement",
    "penalized_potential",
    "mu_mass",
    "domain_from_spec",
]


def _pts(x, d=None):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if d is not None and X.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {X.shape[1]}")
    return X, single


def _out(v, single):
    return v[0] if single else v


class Domain:
    dim: int

    def signed_distance(self, x):
        X, single = _pts(x, self.dim)
        return _out(self._sd(X), single)

    def contains(self, x):
        X, single = _pts(x, self.dim)
        return _out(self._sd(X) > 0, single)

    def dist_to_complement(self, x):
        X, single = _pts(x, self.dim)
        return _out(np.maximum(self._sd(X), 0.0), single)

    def dist_to_shrunk(self, x, eps):
        """Distance to ``{y in D : d(y, complement) > eps}``; ``inf`` if that set is empty."""
        X, single = _pts(x, self.dim)
        if self.shrunk_is_empty(eps):
            return _out(np.full(X.shape[0], np.inf), single)
        return _out(self._dshrunk(X, eps), single)

    def shrunk_is_empty(self, eps):
        return False

    # complement of a convex set and convex sets whose shrink is a parallel
    # body share this closed form; Box overrides it
    def _dshrunk(self, X, eps):
        return np.maximum(eps - self._sd(X), 0.0)

    def _sd(self, X):
        raise NotImplementedError

    def to_spec(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class HalfSpace(Domain):
    """``{x : <x, n> > c}`` with ``n`` normalised on construction."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).ravel()
        norm = np.linalg.norm(n)
        if norm == 0 or not np.isfinite(norm):
            raise ValueError("half-space normal must be a non-zero finite vector")
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "offset", float(self.offset) / norm)

    @property
    def dim(self):
        return self.normal.size

    def _sd(self, X):
        return X @ self.normal - self.offset

    def to_spec(self):
        return {"kind": "half_space", "normal": self.normal.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Ball(Domain):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).ravel())
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self):
        return self.center.size

    def _sd(self, X):
        return self.radius - np.linalg.norm(X - self.center, axis=1)

    def shrunk_is_empty(self, eps):
        return self.radius <= eps

    def to_spec(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Box(Domain):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        if lo.shape != hi.shape or not np.all(lo < hi):
            raise ValueError("box requires lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    def _sd(self, X):
        inside = np.min(np.minimum(X - self.lo, self.hi - X), axis=1)
        gap = np.maximum(np.maximum(self.lo - X, X - self.hi), 0.0)
        outside = np.linalg.norm(gap, axis=1)
        return np.where(outside > 0, -outside, inside)

    def shrunk_is_empty(self, eps):
        return bool(np.any(self.lo + eps >= self.hi - eps))

    def _dshrunk(self, X, eps):
        # componentwise inset is the exact metric shrink of a box
        gap = np.maximum(np.maximum(self.lo + eps - X, X - (self.hi - eps)), 0.0)
        return np.linalg.norm(gap, axis=1)

    def to_spec(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class Complement(Domain):
    """Exterior of the closure of a convex domain (an open set)."""

    inner: Domain

    def __post_init__(self):
        if isinstance(self.inner, WholeSpace):
            raise ValueError("complement of the whole space is empty")

    @property
    def dim(self):
        return self.inner.dim

    def _sd(self, X):
        return -self.inner._sd(X)

    def to_spec(self):
        return {"kind": "complement", "inner": self.inner.to_spec()}


@dataclass(frozen=True, eq=False)
class WholeSpace(Domain):
    d: int

    @property
    def dim(self):
        return self.d

    def _sd(self, X):
        return np.full(X.shape[0], np.inf)

    def _dshrunk(self, X, eps):
        return np.zeros(X.shape[0])

    def to_spec(self):
        return {"kind": "whole_space", "dim": self.d}


def contains(dom, x):
    return dom.contains(x)


def dist_to_complement(dom, x):
    return dom.dist_to_complement(x)


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Ramp potential ``V(x) = min(d(x, D_eps) / eps, 1)``; callable on point arrays."""

    domain: Domain
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def shrunk_empty(self):
        return self.domain.shrunk_is_empty(self.eps)

    def __call__(self, x):
        return penalized_potential(self, x)


def penalized_potential(spec, x):
    """Values in [0, 1]; constant 1 when the shrunk domain is empty (see ``spec.shrunk_empty``)."""
    X, single = _pts(x, spec.domain.dim)
    if spec.shrunk_empty:
        return _out(np.ones(X.shape[0]), single)
    v = np.minimum(spec.domain._dshrunk(X, spec.eps) / spec.eps, 1.0)
    return _out(v, single)


# ---------------------------------------------------------------------------
# Gaussian mass


def _intervals_1d(dom):
    """``dom`` in one dimension as a list of open intervals."""
    if isinstance(dom, WholeSpace):
        return [(-math.inf, math.inf)]
    if isinstance(dom, HalfSpace):
        n, c = dom.normal[0], dom.offset
        return [(c / n, math.inf)] if n > 0 else [(-math.inf, c / n)]
    if isinstance(dom, Ball):
        return [(dom.center[0] - dom.radius, dom.center[0] + dom.radius)]
    if isinstance(dom, Box):
        return [(dom.lo[0], dom.hi[0])]
    if isinstance(dom, Complement):
        inner = sorted(_intervals_1d(dom.inner))
        out, left = [], -math.inf
        for a, b in inner:
            if a > left:
                out.append((left, a))
            left = max(left, b)
        if left < math.inf:
            out.append((left, math.inf))
        return out
    raise TypeError(f"unsupported domain {dom!r}")


def mu_mass(dom, m, method="quadrature", *, n=200_000, seed=0, resolution=256):
    """Estimate ``mu(dom)`` for the invariant measure of ``m``; returns a ``McEstimate``.

    ``quadrature`` is exact in 1-D and for half-spaces; otherwise (d <= 3) it is
    a midpoint rule in Gaussian-quantile coordinates, with the change from
    half resolution reported as the error.
    """
    from .semigroups import McEstimate

    Q = m.Q
    d = Q.shape[0]
    if method == "monte_carlo":
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, d)) @ m.chol_Q.T
        ind = dom.contains(X).astype(float)
        return McEstimate(float(ind.mean()), float(ind.std(ddof=1) / math.sqrt(n)), n)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    if isinstance(dom, WholeSpace):
        return McEstimate(1.0, 0.0, 1)
    if isinstance(dom, HalfSpace) or (isinstance(dom, Complement) and isinstance(dom.inner, HalfSpace)):
        hs = dom if isinstance(dom, HalfSpace) else dom.inner
        s = math.sqrt(float(hs.normal @ Q @ hs.normal))
        p = float(ndtr(-hs.offset / s))
        return McEstimate(p if dom is hs else 1.0 - p, 0.0, 1)
    if d == 1:
        s = math.sqrt(Q[0, 0])
        p = sum(float(ndtr(b / s) - ndtr(a / s)) for a, b in _intervals_1d(dom))
        return McEstimate(p, 0.0, 1)
    if d > 3:
        raise ValueError("quadrature mass limited to d <= 3")
    from scipy.special import ndtri

    def rule(k):
        u = (np.arange(k) + 0.5) / k
        z = ndtri(u)
        Z = np.stack(np.meshgrid(*([z] * d), indexing="ij"), axis=-1).reshape(-1, d)
        return float(dom.contains(Z @ m.chol_Q.T).mean())

    fine, coarse = rule(resolution), rule(resolution // 2)
    return McEstimate(fine, abs(fine - coarse), resolution**d)


def domain_from_spec(spec, dim=None):
    """Build a domain from a config mapping with a ``kind`` tag."""
    try:
        kind = spec["kind"]
        if kind == "half_space":
            return HalfSpace(spec["normal"], spec.get("offset", 0.0))
        if kind == "ball":
            return Ball(spec["center"], spec["radius"])
        if kind == "box":
            return Box(spec["lo"], spec["hi"])
        if kind == "complement":
            return Complement(domain_from_spec(spec["inner"], dim))
        if kind == "whole_space":
            return WholeSpace(int(spec.get("dim", dim)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid domain block: {exc}") from exc
    raise ConfigError(f"unknown domain kind {kind!r}")
