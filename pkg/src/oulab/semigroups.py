"""Monte-Carlo and closed-form evaluation of the OU, Feynman-Kac and killed semigroups.

Estimators return :class:`McEstimate`.  Every estimator draws from its own
block-keyed random streams, so two estimators called with the same seed and
the same path parameters see the same paths; this is what makes the
shared-randomness penalization gaps small.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import matkit, paths
from .domains import PotentialSpec, WholeSpace
from .exceptions import CapabilityError
from .model import gauss_hermite_rule, gaussian_expectation
from .testfunctions import ExpLinear, Polynomial

__all__ = [
    "McEstimate",
    "ExpFunctional",
    "ConstantPotential",
    "mc_semigroup",
    "exact_on_exponentials",
    "mc_feynman_kac",
    "mc_killed",
    "survival_curve",
    "log_survival_slope",
    "penalization_sweep",
    "ergodic_limit",
    "invariance_check",
    "fk_contraction",
    "killed_contraction",
    "gaussian_mean",
]


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n: int
    bias_note: str | None = None
    bias: float = 0.0  # numeric budget described by bias_note

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError("std_error must be non-negative")
        if self.n < 1:
            raise ValueError("sample count must be positive")

    def agrees(self, value, n_se=4.0):
        return abs(self.mean - value) <= n_se * self.std_error + self.bias


def _estimate(values, bias_note=None, bias=0.0):
    v = np.asarray(values, dtype=float)
    n = v.size
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(float(v.mean()), se, n, bias_note, bias)


@dataclass(frozen=True, eq=False)
class ExpFunctional:
    """``K_{x*}(x) = exp(<x, x*> - 1/2 <Q x*, x*>)``; unit mean under the invariant law."""

    xstar: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xstar, dtype=float).ravel()
        if not np.all(np.isfinite(xs)):
            raise ValueError("x* must be finite")
        object.__setattr__(self, "xstar", xs)

    def as_function(self, m):
        return ExpLinear(self.xstar, -0.5 * float(self.xstar @ m.Q @ self.xstar))


@dataclass(frozen=True)
class ConstantPotential:
    """Potential equal to ``value`` everywhere; bypasses geometry in tests."""

    value: float
    eps: float

    def __call__(self, x):
        X = np.atleast_2d(np.asarray(x, dtype=float))
        return np.full(X.shape[0], float(self.value))


def _point(m, x):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != m.d:
        raise ValueError(f"point has dimension {x.size}, model has {m.d}")
    return x


def _terminal(m, X0, t, n, seed, purpose, block_size=paths.BLOCK_SIZE):
    """States at time ``t`` from ``X0`` (point or (n, d)) by one exact step per block stream."""
    E, Qt = paths.transition_covariance(m.A, t)
    C = np.linalg.cholesky(Qt)
    X0 = np.asarray(X0, dtype=float)
    out = np.empty((n, m.d))
    for b, size in paths._blocks(n, block_size):
        rng = paths.RngStream.for_block(seed, b, purpose).generator()
        x0 = X0 if X0.ndim == 1 else X0[b * block_size : b * block_size + size]
        out[b * block_size : b * block_size + size] = x0 @ E.T + rng.standard_normal((size, m.d)) @ C.T
    return out


def mc_semigroup(m, f, x, t, n, h=None, seed=0):
    """``P(t) f(x)`` from ``n`` exact samples of ``X^x(t)`` (``h`` is unused: one step suffices)."""
    x = _point(m, x)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return McEstimate(float(f(x)), 0.0, n)
    Y = _terminal(m, x, t, n, seed, "semigroup")
    return _estimate(f(Y))


def exact_on_exponentials(m, k, t, x):
    """``P(t) K_{x*}(x) = K_{exp(tA^T) x*}(x)``.

    From ``E exp<X^x(t), x*> = exp(<e^{tA} x, x*> + 1/2 <Q_t x*, x*>)`` and
    ``Q - Q_t = e^{tA} Q e^{tA^T}``.
    """
    xs = k.xstar if isinstance(k, ExpFunctional) else np.asarray(k, dtype=float).ravel()
    y = matkit.expm(m.A.T, t) @ xs
    X = np.asarray(x, dtype=float)
    return np.exp(X @ y - 0.5 * float(y @ m.Q @ y))


def _check_resolution(spec, h):
    eps = getattr(spec, "eps", None)
    if eps is None:
        raise CapabilityError("potential must carry an eps attribute")
    if h > eps / 5 * (1 + 1e-12):
        raise ValueError(f"step h={h:g} under-resolves the potential scale eps={eps:g} (need h <= eps/5)")


def _n_steps(t, h):
    K = int(round(t / h))
    if K < 1 or abs(K * h - t) > 1e-9 * max(1.0, t):
        raise ValueError("t must be a positive multiple of h")
    return K


def mc_feynman_kac(m, spec, f, x, t, n, h, seed=0, *, jobs=1):
    """``E[f(X^x(t)) exp(-(1/eps) int_0^t V(X^x(r)) dr)]`` with the trapezoid rule on the grid."""
    x = _point(m, x)
    if not t > 0:
        raise ValueError("t must be positive")
    if h > t:
        raise ValueError("h must not exceed t")
    _check_resolution(spec, h)
    K = _n_steps(t, h)
    S = paths.propagate(m, x, h, K, n, seed, potentials=(spec,), purpose="grid", jobs=jobs)
    w = np.exp(-S.integrals[:, 0, -1] / spec.eps)
    return _estimate(f(S.states[:, -1]) * w)


def _require_inside(dom, x):
    if not bool(dom.contains(x)):
        raise ValueError("starting point must lie in the domain")


def _killed_values(m, dom, f, S, col, k):
    Y = S.states[:, col]
    vals = np.where(S.alive[:, col], f(Y), 0.0)
    bias = paths.bias_budget(k, dom, float(np.mean(np.abs(vals))))
    note = f"exit-detection bias budget {bias:.3g} (0.5826 sigma_perp sqrt(h) E|f| 1_surv)"
    return vals, bias, note


def mc_killed(m, dom, f, x, t, n, h, seed=0, *, bridge=None, jobs=1):
    """``E[f(X^x(t)) 1{tau > t}]``; dead paths contribute 0."""
    x = _point(m, x)
    _require_inside(dom, x)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return McEstimate(float(f(x)), 0.0, n)
    if bridge is None:
        bridge = paths._bridge_normal(dom) is not None
    K = _n_steps(t, h)
    S = paths.propagate(m, x, h, K, n, seed, dom=dom, bridge=bridge, purpose="grid", jobs=jobs)
    k = paths.make_step_kernel(m, h)
    vals, bias, note = _killed_values(m, dom, f, S, 0, k)
    return _estimate(vals, note, bias)


def survival_curve(m, dom, x, times, n, h, seed=0, *, f=None, bridge=None, jobs=1):
    """Killed estimates of ``f`` (default 1) at each of ``times`` from one set of paths."""
    x = _point(m, x)
    _require_inside(dom, x)
    if bridge is None:
        bridge = paths._bridge_normal(dom) is not None
    steps = [int(round(t / h)) for t in times]
    S = paths.propagate(m, x, h, max(steps), n, seed, dom=dom, bridge=bridge,
                        record_steps=steps, purpose="grid", jobs=jobs)
    k = paths.make_step_kernel(m, h)
    f = f or (lambda Y: np.ones(Y.shape[0]))
    out = []
    for s in steps:
        col = int(np.searchsorted(S.record_steps, s))
        vals, bias, note = _killed_values(m, dom, f, S, col, k)
        out.append(_estimate(vals, note, bias))
    return out


def log_survival_slope(times, estimates):
    """Least-squares slope of ``log mean`` against time, weighted by the delta-method variance."""
    t = np.asarray(times, dtype=float)
    mu = np.array([e.mean for e in estimates])
    se = np.array([e.std_error for e in estimates])
    if np.any(mu <= 0):
        raise ValueError("survival estimates must be positive to take logs")
    y = np.log(mu)
    w = 1.0 / np.maximum(se / mu, 1e-12) ** 2
    X = np.stack([np.ones_like(t), t], axis=1)
    cov = np.linalg.inv(X.T @ (w[:, None] * X))
    beta = cov @ (X.T @ (w * y))
    return float(beta[1]), float(math.sqrt(cov[1, 1]))


def penalization_sweep(m, dom, f, x, t, eps_list, n, h, seed=0, *, bridge=None, n_se=3.0, jobs=1):
    """Shared-randomness comparison of ``P_eps(t) f~`` with ``P_Omega(t) f``.

    ``f~`` is ``f`` extended by zero outside the domain.  Returns
    ``(rows, summary)``; each row carries the Feynman-Kac estimate, the gap
    estimate and its standard error from the paired differences.
    """
    x = _point(m, x)
    _require_inside(dom, x)
    eps = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    for e in eps:
        _check_resolution(PotentialSpec(dom, e), h)
    if bridge is None:
        bridge = paths._bridge_normal(dom) is not None
    K = _n_steps(t, h)
    pots = [PotentialSpec(dom, e) for e in eps]
    S = paths.propagate(m, x, h, K, n, seed, dom=dom, bridge=bridge, potentials=pots,
                        purpose="grid", jobs=jobs)
    Y = S.states[:, -1]
    alive = S.alive[:, -1]
    fy = np.asarray(f(Y), dtype=float)
    ftilde = np.where(dom.contains(Y), fy, 0.0)
    killed = np.where(alive, fy, 0.0)
    k = paths.make_step_kernel(m, h)
    bias = paths.bias_budget(k, dom, float(np.mean(np.abs(killed))))
    est_kill = _estimate(killed, f"exit-detection bias budget {bias:.3g}", bias)
    rows = []
    nonneg = bool(np.all(ftilde >= 0))
    for q, e in enumerate(eps):
        w = np.exp(-S.integrals[:, q, -1] / e)
        fk = ftilde * w
        gap = _estimate(fk - killed)
        dominance = None
        if nonneg:
            # pathwise: f~ w >= 1{alive} f w whenever f >= 0 on the domain
            dominance = bool(fk.mean() >= np.mean(killed * w) - 1e-15)
        rows.append({"eps": e, "fk": _estimate(fk), "gap": gap, "abs_gap": abs(gap.mean),
                     "dominance": dominance})
    gaps = [r["abs_gap"] for r in rows]
    monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
    final = rows[-1]["gap"]
    within = abs(final.mean) <= n_se * final.std_error + bias
    # observed convergence order gap ~ C eps^p over the sweep
    le, lg = np.log(eps), np.log(np.maximum(gaps, 1e-300))
    order = float(np.polyfit(le, lg, 1)[0]) if len(eps) > 1 else float("nan")
    summary = {"killed": est_kill, "bias": bias, "monotone": monotone,
               "final_within": bool(within), "order": order}
    return rows, summary


# ---------------------------------------------------------------------------
# invariant-measure functionals


def gaussian_mean(m, f, *, level=20, n=400_000, seed=0):
    """``int f dmu`` exactly for polynomials, by Gauss-Hermite for d <= 3, else Monte Carlo."""
    if isinstance(f, Polynomial):
        return McEstimate(gaussian_expectation(f, m.Q), 0.0, 1)
    if isinstance(f, ExpLinear):
        return McEstimate(float(math.exp(f.c + 0.5 * f.a @ m.Q @ f.a)), 0.0, 1)
    if m.d <= 3:
        q = gauss_hermite_rule(m.measure, level)
        return McEstimate(q.integrate(f), 0.0, q.weights.size)
    rng = paths.RngStream.for_block(seed, 0, "mean").generator()
    return _estimate(f(m.measure.sample(n, rng)))


def _stationary_starts(m, n, seed, purpose):
    rng = paths.RngStream.for_block(seed, 0, purpose).generator()
    return m.measure.sample(n, rng)


def ergodic_limit(m, f, t_list, n, seed=0, quad=None, *, n_inner=8):
    """``||P(t) f - int f dmu||^2_{L^2(mu)}`` per ``t``.

    Outer starting points ``x ~ mu``; two independent groups of ``n_inner``
    exact samples of ``X^x(t)`` per start give the unbiased product
    ``(mean_1 - fbar)(mean_2 - fbar)``.  ``quad`` (a ``QuadratureRule``)
    overrides the computation of ``fbar``.
    """
    fbar = quad.integrate(f) if quad is not None else gaussian_mean(m, f).mean
    X = _stationary_starts(m, n, seed, "ergodic")
    Xr = np.repeat(X, n_inner, axis=0)
    rows = []
    for i, t in enumerate(t_list):
        if t == 0:
            vals = (f(X) - fbar) ** 2
        else:
            a = f(_terminal(m, Xr, t, n * n_inner, seed, f"ergodic-a-{i}")).reshape(n, n_inner).mean(axis=1)
            b = f(_terminal(m, Xr, t, n * n_inner, seed, f"ergodic-b-{i}")).reshape(n, n_inner).mean(axis=1)
            vals = (a - fbar) * (b - fbar)
        est = _estimate(vals)
        rows.append({"t": float(t), "norm_sq": est, "norm": math.sqrt(max(est.mean, 0.0)), "mean": fbar})
    return rows


def invariance_check(m, f, t, n, seed=0):
    """``int P(t) f dmu - int f dmu`` estimated from stationary starts."""
    X = _stationary_starts(m, n, seed, "invariance")
    Y = _terminal(m, X, t, n, seed, "invariance-step")
    fbar = gaussian_mean(m, f).mean
    return _estimate(np.asarray(f(Y)) - fbar)


def _pair_starts(m, n, seed, purpose):
    X = _stationary_starts(m, n, seed, purpose)
    return X, np.repeat(X, 2, axis=0)


def fk_contraction(m, spec, f, t, n, h, seed=0, *, jobs=1):
    """Estimate of ``int f^2 dmu - int (P_eps(t) f)^2 dmu`` (non-negative for a contraction)."""
    _check_resolution(spec, h)
    K = _n_steps(t, h)
    X, X2 = _pair_starts(m, n, seed, "fk-contraction")
    S = paths.propagate(m, X2, h, K, 2 * n, seed, potentials=(spec,), purpose="fk-contraction", jobs=jobs)
    v = np.asarray(f(S.states[:, -1])) * np.exp(-S.integrals[:, 0, -1] / spec.eps)
    prod = v[0::2] * v[1::2]
    return _estimate(np.asarray(f(X)) ** 2 - prod)


def killed_contraction(m, dom, f, t, n, h, seed=0, *, bridge=None, jobs=1):
    """Estimate of ``int_Omega f^2 dmu - int_Omega (P_Omega(t) f)^2 dmu``."""
    if bridge is None:
        bridge = paths._bridge_normal(dom) is not None
    K = _n_steps(t, h)
    X, X2 = _pair_starts(m, n, seed, "kill-contraction")
    S = paths.propagate(m, X2, h, K, 2 * n, seed, dom=dom, bridge=bridge,
                        purpose="kill-contraction", jobs=jobs)
    v = np.where(S.alive[:, -1], np.asarray(f(S.states[:, -1])), 0.0)
    prod = v[0::2] * v[1::2]
    inside = dom.contains(X) if not isinstance(dom, WholeSpace) else np.ones(n, dtype=bool)
    return _estimate(np.where(inside, np.asarray(f(X)) ** 2, 0.0) - prod)
