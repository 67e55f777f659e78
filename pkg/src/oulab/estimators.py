"""scikit-learn shaped wrappers around the semigroup estimators and the grid.

``fit`` builds the model (and, for the grid, assembles the operators);
``predict`` evaluates at a batch of starting points.  Hyper-parameters are
plain constructor arguments, so ``get_params``/``set_params``/``clone`` work
as usual.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import galerkin
from . import semigroups as sg
from .domains import PotentialSpec, domain_from_spec
from .model import build_model
from .testfunctions import function_from_spec


class SemigroupEstimator(BaseEstimator):
    """Monte-Carlo ``P(t) f``, ``P_eps(t) f`` or ``P_Omega(t) f`` at each row of ``X``.

    ``mode`` is ``"plain"``, ``"feynman_kac"`` (needs ``domain`` and ``eps``)
    or ``"killed"`` (needs ``domain``).  ``f`` is a test-function mapping such
    as ``{"kind": "linear", "coeffs": [1.0]}``.
    """

    def __init__(self, A=((-1.0,),), f=None, t=1.0, mode="plain", domain=None, eps=None,
                 n_paths=100_000, h=1e-3, seed=0):
        self.A = A
        self.f = f
        self.t = t
        self.mode = mode
        self.domain = domain
        self.eps = eps
        self.n_paths = n_paths
        self.h = h
        self.seed = seed

    def fit(self, X=None, y=None):
        if self.mode not in ("plain", "feynman_kac", "killed"):
            raise ValueError(f"unknown mode {self.mode!r}")
        self.model_ = build_model(np.asarray(self.A, dtype=float))
        d = self.model_.d
        self.f_ = function_from_spec(self.f or {"kind": "linear", "coeffs": [1.0] + [0.0] * (d - 1)}, d)
        self.domain_ = domain_from_spec(self.domain, d) if self.domain is not None else None
        if self.mode != "plain" and self.domain_ is None:
            raise ValueError(f"mode {self.mode!r} needs a domain")
        if self.mode == "feynman_kac" and self.eps is None:
            raise ValueError("mode 'feynman_kac' needs eps")
        self.n_features_in_ = d
        return self

    def _one(self, x):
        m = self.model_
        if self.mode == "plain":
            return sg.mc_semigroup(m, self.f_, x, self.t, self.n_paths, seed=self.seed)
        if self.mode == "killed":
            return sg.mc_killed(m, self.domain_, self.f_, x, self.t, self.n_paths, self.h, self.seed)
        spec = PotentialSpec(self.domain_, self.eps)
        return sg.mc_feynman_kac(m, spec, self.f_, x, self.t, self.n_paths, self.h, self.seed)

    def predict(self, X, return_std=False):
        check_is_fitted(self, "model_")
        X = check_array(X, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, the model has dimension {self.n_features_in_}")
        est = [self._one(x) for x in X]
        mean = np.array([e.mean for e in est])
        if return_std:
            return mean, np.array([e.std_error for e in est])
        return mean


class GridDiscretization(BaseEstimator):
    """Finite-element discretization of the generator on a truncated box.

    After ``fit`` the assembled :class:`~oulab.galerkin.GridOperator` is in
    ``operator_``; ``predict`` applies ``(lam - L)^{-1}`` for the chosen
    realization to nodal values of ``f`` at the rows of ``X`` (grid nodes).
    """

    def __init__(self, A=((-1.0,),), domain=None, n_per_dim=201, R=5.0, realization="dirichlet", lam=1.0):
        self.A = A
        self.domain = domain
        self.n_per_dim = n_per_dim
        self.R = R
        self.realization = realization
        self.lam = lam

    def fit(self, X=None, y=None):
        m = build_model(np.asarray(self.A, dtype=float))
        dom = domain_from_spec(self.domain, m.d) if self.domain is not None else None
        grid = galerkin.build_grid(m, dom, self.n_per_dim, self.R)
        self.operator_ = galerkin.assemble(m, grid)
        self.n_features_in_ = m.d
        return self

    def spectral_gap(self):
        check_is_fitted(self, "operator_")
        mode = "dirichlet" if self.realization == "dirichlet" else "whole_meanzero"
        return galerkin.poincare_gap(self.operator_, mode).gap

    def predict(self, X, f=None):
        """Resolvent applied to ``f`` sampled on the grid, evaluated at the nearest node to each row of ``X``."""
        check_is_fitted(self, "operator_")
        X = check_array(X, ensure_2d=True)
        op = self.operator_
        r = op.realization(self.realization)
        nodes = op.grid.nodes if self.realization == "whole" else op.grid.nodes[op.grid.mask]
        fn = function_from_spec(f or {"kind": "constant", "value": 1.0}, self.n_features_in_)
        u = np.linalg.solve(self.lam * np.eye(r.n) - r.L.toarray(), fn(nodes))
        idx = np.argmin(((X[:, None, :] - nodes[None, :, :]) ** 2).sum(axis=2), axis=1)
        return u[idx]
