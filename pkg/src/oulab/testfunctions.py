"""Closed family of test functions with analytic first and second derivatives.

All objects are callables on point arrays of shape ``(n, d)`` (a single point
of shape ``(d,)`` is also accepted) and expose ``grad`` and ``hess``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

__all__ = ["TestFunction", "Polynomial", "ExpLinear", "TanhLinear", "function_from_spec"]


def _points(X, d):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {X.shape[1]}")
    return X, single


class TestFunction:
    __test__ = False  # not a pytest class
    dim: int

    def __call__(self, X):
        raise NotImplementedError

    def grad(self, X):
        raise NotImplementedError

    def hess(self, X):
        raise NotImplementedError


class Polynomial(TestFunction):
    """Multivariate polynomial stored as ``{exponent tuple: coefficient}``."""

    def __init__(self, terms, dim):
        self.dim = int(dim)
        clean = {}
        for exps, c in dict(terms).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.dim or min(exps, default=0) < 0:
                raise ValueError(f"bad exponent tuple {exps} for dimension {self.dim}")
            if c != 0:
                clean[exps] = clean.get(exps, 0.0) + float(c)
        self.terms = {k: v for k, v in clean.items() if v != 0}

    @classmethod
    def constant(cls, c, dim):
        return cls({(0,) * dim: c}, dim)

    @classmethod
    def linear(cls, coeffs, offset=0.0):
        coeffs = np.asarray(coeffs, dtype=float).ravel()
        d = coeffs.size
        terms = {tuple(int(i == k) for i in range(d)): c for k, c in enumerate(coeffs)}
        terms[(0,) * d] = offset
        return cls(terms, d)

    @classmethod
    def monomial(cls, exps, coeff=1.0):
        return cls({tuple(exps): coeff}, len(exps))

    @classmethod
    def random(cls, dim, degree, n_terms, rng):
        """Random sparse polynomial with ``n_terms`` monomials of total degree <= ``degree``."""
        pool = []
        for deg in range(degree + 1):
            for combo in combinations_with_replacement(range(dim), deg):
                e = [0] * dim
                for i in combo:
                    e[i] += 1
                pool.append(tuple(e))
        idx = rng.choice(len(pool), size=min(n_terms, len(pool)), replace=False)
        return cls({pool[i]: rng.standard_normal() for i in idx}, dim)

    @property
    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def __repr__(self):
        return f"Polynomial({self.terms!r}, dim={self.dim})"

    # algebra -------------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(float(other), self.dim)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0.0) + v
        return Polynomial(out, self.dim)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial({k: v * float(other) for k, v in self.terms.items()}, self.dim)
        out = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0.0) + v1 * v2
        return Polynomial(out, self.dim)

    __rmul__ = __mul__

    def derivative(self, i):
        out = {}
        for k, v in self.terms.items():
            if k[i] > 0:
                k2 = list(k)
                k2[i] -= 1
                out[tuple(k2)] = out.get(tuple(k2), 0.0) + v * k[i]
        return Polynomial(out, self.dim)

    def times_coordinate(self, i):
        out = {}
        for k, v in self.terms.items():
            k2 = list(k)
            k2[i] += 1
            out[tuple(k2)] = v
        return Polynomial(out, self.dim)

    # evaluation ----------------------------------------------------------
    def _eval_terms(self, X, terms):
        val = np.zeros(X.shape[0])
        for k, v in terms.items():
            val += v * np.prod(X ** np.asarray(k), axis=1)
        return val

    def __call__(self, X):
        X, single = _points(X, self.dim)
        val = self._eval_terms(X, self.terms)
        return val[0] if single else val

    def grad(self, X):
        X, single = _points(X, self.dim)
        G = np.stack([self._eval_terms(X, self.derivative(i).terms) for i in range(self.dim)], axis=1)
        return G[0] if single else G

    def hess(self, X):
        X, single = _points(X, self.dim)
        d = self.dim
        H = np.empty((X.shape[0], d, d))
        for i in range(d):
            di = self.derivative(i)
            for j in range(i, d):
                H[:, i, j] = H[:, j, i] = self._eval_terms(X, di.derivative(j).terms)
        return H[0] if single else H


@dataclass(frozen=True, eq=False)
class ExpLinear(TestFunction):
    """``exp(<x, a> + c)``."""

    a: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).ravel())

    @property
    def dim(self):
        return self.a.size

    def __call__(self, X):
        X, single = _points(X, self.dim)
        v = np.exp(X @ self.a + self.c)
        return v[0] if single else v

    def grad(self, X):
        X, single = _points(X, self.dim)
        G = np.exp(X @ self.a + self.c)[:, None] * self.a
        return G[0] if single else G

    def hess(self, X):
        X, single = _points(X, self.dim)
        H = np.exp(X @ self.a + self.c)[:, None, None] * np.outer(self.a, self.a)
        return H[0] if single else H


@dataclass(frozen=True, eq=False)
class TanhLinear(TestFunction):
    """``tanh(<x, a> + b)``, a bounded smooth test function."""

    a: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).ravel())

    @property
    def dim(self):
        return self.a.size

    def __call__(self, X):
        X, single = _points(X, self.dim)
        v = np.tanh(X @ self.a + self.b)
        return v[0] if single else v

    def grad(self, X):
        X, single = _points(X, self.dim)
        th = np.tanh(X @ self.a + self.b)
        G = (1 - th**2)[:, None] * self.a
        return G[0] if single else G

    def hess(self, X):
        X, single = _points(X, self.dim)
        th = np.tanh(X @ self.a + self.b)
        H = (-2 * th * (1 - th**2))[:, None, None] * np.outer(self.a, self.a)
        return H[0] if single else H


def function_from_spec(spec, dim):
    """Build a test function from a config mapping such as ``{"kind": "linear", "coeffs": [1.0]}``."""
    kind = spec.get("kind")
    if kind == "constant":
        return Polynomial.constant(spec.get("value", 1.0), dim)
    if kind == "linear":
        return Polynomial.linear(spec["coeffs"], spec.get("offset", 0.0))
    if kind == "polynomial":
        return Polynomial({tuple(t["exponents"]): t["coeff"] for t in spec["terms"]}, dim)
    if kind == "exp_linear":
        return ExpLinear(spec["a"], spec.get("c", 0.0))
    if kind == "tanh_linear":
        return TanhLinear(spec["a"], spec.get("b", 0.0))
    raise ValueError(f"unknown test-function kind {kind!r}")
