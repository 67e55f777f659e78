"""Named verification suites and the check catalog.

Each check binds estimators or grid operators to one claim and returns a
:class:`CheckResult` with the measured value, the bound or oracle, the
tolerance and a verdict.  Statistical checks that fail are rerun once with
four times the samples.  Results are ordered by check id so that output does
not depend on scheduling.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import multiprocessing as mp
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, galerkin, matkit, paths
from . import semigroups as sg
from .domains import Ball, Complement, HalfSpace, PotentialSpec, WholeSpace, domain_from_spec, mu_mass
from .exceptions import CapacityError, ConfigError
from .model import build_model, duality_residual, gauss_hermite_rule
from .testfunctions import Polynomial

__all__ = [
    "CheckResult",
    "Suite",
    "CHECKS",
    "SUITES",
    "DEFAULT_PARAMS",
    "builtin_suite",
    "run_suite",
    "config_hash",
    "write_results",
]

PASS, FAIL, OBSERVE = "pass", "fail", "observe-only"

DEFAULT_PARAMS = {
    "duality_trials": 6,
    "n_oracle": 100_000,
    "n_increment": 100_000,
    "n_invariance": 200_000,
    "n_ergodic": 100_000,
    "n_contraction": 20_000,
    "contraction_t": 0.5,
    "contraction_h": 0.01,
    "contraction_eps": 0.1,
    "n_kill": 200_000,
    "h_kill": 1e-3,
    "kill_t": 1.0,
    "slope_times": [1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0],
    "pen_eps": [0.4, 0.2, 0.1, 0.05],
    "n_pen": 200_000,
    "h_pen": 1e-3,
    "grid_n_1d": 201,
    "grid_n_2d": 41,
    "grid_R": 5.0,
    "poincare_R": 6.0,
    "resolvent_n_1d": 200,
    "resolvent_n_2d": 61,
    "bisector_n_2d": 25,
    "riesz_n_2d": [41, 61],
    "n_probe_f": 10,
    "max_paths": 10_000_000,
    "max_grid": 20_000,
}


@dataclass
class CheckResult:
    check_id: str
    anchor: str
    measured: float
    bound: float | None
    tol: float | None
    verdict: str
    seconds: float = 0.0
    details: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    statistical: bool = False
    attempts: int = 1
    resource_error: bool = False

    def __post_init__(self):
        if self.verdict not in (PASS, FAIL, OBSERVE):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == OBSERVE and self.bound is not None:
            raise ValueError("observe-only results carry no bound")


@dataclass
class Suite:
    name: str
    A: list
    domain: dict
    checks: list
    seed: int
    params: dict = field(default_factory=dict)
    caps: dict = field(default_factory=dict)
    tol: float = 1e-10

    def __post_init__(self):
        unknown = [c for c in self.checks if c not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown check ids: {', '.join(unknown)}")

    def spec(self):
        return {"name": self.name, "A": [list(map(float, r)) for r in np.atleast_2d(self.A)],
                "domain": self.domain, "checks": list(self.checks), "seed": int(self.seed),
                "params": self.params, "caps": self.caps, "tol": self.tol}


def config_hash(obj):
    """Git blob hash of the canonical JSON encoding of ``obj``."""
    data = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


# ---------------------------------------------------------------------------
# context


@dataclass
class Context:
    model: object
    domain: object
    seed: int
    params: dict
    jobs: int = 1
    scale: int = 1

    def p(self, key):
        return self.params[key]

    def n(self, key):
        n = int(self.params[key] * self.scale)
        if n > self.params["max_paths"]:
            raise CapacityError(f"{key}={n} exceeds max_paths={self.params['max_paths']}")
        return n

    def grid(self, dom, n_per_dim, R=None):
        if n_per_dim ** self.model.d > self.params["max_grid"]:
            raise CapacityError(f"grid of {n_per_dim}^{self.model.d} nodes exceeds max_grid")
        g = galerkin.build_grid(self.model, dom, n_per_dim, R if R is not None else self.p("grid_R"))
        return galerkin.assemble(self.model, g)

    def grid_n(self):
        return self.p("grid_n_1d") if self.model.d == 1 else self.p("grid_n_2d")

    def rng(self, tag):
        return paths.RngStream.for_block(self.seed, 0, tag).generator()


@dataclass
class Outcome:
    measured: float
    bound: float | None
    tol: float | None
    verdict: str
    details: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)


def _verdict(ok):
    return PASS if ok else FAIL


def _halfspace(dom):
    """``(n, c)`` for ``{<x, n> > c}`` or ``None``."""
    if isinstance(dom, HalfSpace):
        return dom.normal, dom.offset
    if isinstance(dom, Complement) and isinstance(dom.inner, HalfSpace):
        return -dom.inner.normal, -dom.inner.offset
    return None


def _eigen_halfspace(m, dom):
    """``(n, kappa)`` when the domain is a half-space through 0 with ``A^T n = -kappa n``."""
    hs = _halfspace(dom)
    if hs is None or abs(hs[1]) > 1e-12:
        return None
    n = hs[0]
    v = m.A.T @ n
    kappa = -float(v @ n)
    if np.linalg.norm(v + kappa * n) > 1e-10 or kappa <= 0:
        return None
    return n, kappa


def _is_symmetric(m):
    return float(np.abs(m.B - 0.5 * np.eye(m.d)).max()) < 1e-12


# ---------------------------------------------------------------------------
# checks


def check_model_duality(ctx):
    m = ctx.model
    rng = ctx.rng("duality")
    worst = 0.0
    routes = {"exact": 0.0, "quadrature": 0.0}
    q = gauss_hermite_rule(m.measure, 4) if m.d <= 3 else None
    for _ in range(ctx.p("duality_trials")):
        f = Polynomial.random(m.d, 3, 6, rng)
        g = Polynomial.random(m.d, 3, 6, rng)
        scale = max(1.0, float(np.abs(m.Q).max())) ** 3 * (1 + sum(abs(v) for v in f.terms.values())) \
            * (1 + sum(abs(v) for v in g.terms.values()))
        r = abs(duality_residual(m, f, g)) / scale
        routes["exact"] = max(routes["exact"], r)
        if q is not None:
            rq = abs(duality_residual(m, f, g, q)) / scale
            routes["quadrature"] = max(routes["quadrature"], rq)
        worst = max(worst, r, routes["quadrature"])
    return Outcome(worst, 1e-8, 1e-8, _verdict(worst <= 1e-8),
                   {"routes": routes, "B_selection": [n for n in m.notes if n.startswith("B =")]})


def check_model_bmatrix(ctx):
    m = ctx.model
    rng = ctx.rng("bmatrix")
    sym = float(np.abs(m.B + m.B.T - np.eye(m.d)).max())
    H = rng.standard_normal((100, m.d))
    quad = np.einsum("ni,ij,nj->n", H, m.B, H) / np.sum(H * H, axis=1)
    dev = float(np.abs(quad - 0.5).max())
    worst = max(sym, dev)
    return Outcome(worst, 0.0, 1e-12, _verdict(worst <= 1e-12),
                   {"B": m.B.tolist(), "norm_B": matkit.op_norm(m.B), "sym_residual": sym, "form_deviation": dev})


def check_paths_increment(ctx):
    m = ctx.model
    xs = np.zeros(m.d)
    xs[0] = 1.0
    pairs = [(0.0, 0.0), (0.0, math.log(2.0))] + [(0.1 * k, 0.1 * k + tau)
                                                  for k, tau in enumerate([0.05, 0.1, 0.25, 0.5, 0.75, 1.0])]
    pairs = [(s, t) for s, t in pairs if t <= 1.0 + 1e-12 or (s, t) == (0.0, math.log(2.0))]
    rows = paths.stationary_increment_check(m, xs, pairs, ctx.n("n_increment"), ctx.seed)
    z = max((abs(r["estimate"] - r["closed_form"]) / r["std_error"] if r["std_error"] > 0 else 0.0) for r in rows)
    ok = all(r["pass"] for r in rows)
    ref = next(r for r in rows if abs(r["t"] - math.log(2.0)) < 1e-12 and r["s"] == 0.0)
    return Outcome(z, 4.0, 4.0, _verdict(ok),
                   {"reference_pair": ref, "M_T": rows[0]["M_T"]},
                   {"increments": rows})


def check_sg_invariance(ctx):
    m = ctx.model
    fs = {"x1^2": Polynomial.monomial(tuple(2 if i == 0 else 0 for i in range(m.d))),
          "x1": Polynomial.monomial(tuple(1 if i == 0 else 0 for i in range(m.d)))}
    rows, z = [], 0.0
    for name, f in fs.items():
        for t in (0.5, 2.0):
            est = sg.invariance_check(m, f, t, ctx.n("n_invariance"), ctx.seed)
            zi = abs(est.mean) / est.std_error if est.std_error > 0 else 0.0
            z = max(z, zi)
            rows.append({"estimator": f"invariance[{name}]", "t": t, "eps": "", "value": est.mean,
                         "std_error": est.std_error, "bias_note": ""})
    return Outcome(z, 4.0, 4.0, _verdict(z <= 4.0), {}, {"estimates": rows})


def _oracle_grid(d):
    e1 = np.eye(d)[0]
    ts = [0.25, math.log(2.0), 1.5]
    xs = [np.zeros(d), 0.5 * e1, -np.ones(d)]
    xss = [e1, 0.5 * np.ones(d), -0.7 * np.eye(d)[-1]]
    return ts, xs, xss


def check_sg_oracle(ctx):
    m = ctx.model
    ts, xs, xss = _oracle_grid(m.d)
    rows, z = [], 0.0
    n = ctx.n("n_oracle")
    for t in ts:
        for x in xs:
            for xst in xss:
                kf = sg.ExpFunctional(xst)
                exact = float(sg.exact_on_exponentials(m, kf, t, x))
                est = sg.mc_semigroup(m, kf.as_function(m), x, t, n, seed=ctx.seed)
                zi = abs(est.mean - exact) / est.std_error
                z = max(z, zi)
                rows.append({"t": t, "x": x.tolist(), "xstar": xst.tolist(), "mc": est.mean,
                             "std_error": est.std_error, "exact": exact, "z": zi})
    details = {}
    if m.d == 1:
        details["reference"] = float(sg.exact_on_exponentials(m, sg.ExpFunctional([1.0]), math.log(2.0), [0.0]))
    est_rows = [{"estimator": "semigroup[K]", "t": r["t"], "eps": "", "value": r["mc"],
                 "std_error": r["std_error"], "bias_note": ""} for r in rows]
    return Outcome(z, 4.0, 4.0, _verdict(z <= 4.0), details, {"oracle": rows, "estimates": est_rows})


def check_sg_ergodic(ctx):
    m = ctx.model
    xs = np.eye(m.d)[0]
    f = Polynomial.linear(xs)
    ts = [1.0, 2.0, 3.0]
    rows = sg.ergodic_limit(m, f, [0.0] + ts, ctx.n("n_ergodic"), ctx.seed)
    out, z = [], 0.0
    for r in rows:
        y = matkit.expm(m.A.T, r["t"]) @ xs
        exact = float(y @ m.Q @ y)
        est = r["norm_sq"]
        zi = abs(est.mean - exact) / est.std_error if est.std_error > 0 else 0.0
        if r["t"] > 0:
            z = max(z, zi)
        out.append({"t": r["t"], "kind": "ergodic", "value": est.mean, "std_error": est.std_error,
                    "exact": exact, "z": zi})
    # pointwise trend for an exponential functional (reported only)
    kf = sg.ExpFunctional(0.5 * xs)
    trend = [{"t": t, "x": 1.0, "value": float(sg.exact_on_exponentials(m, kf, t, xs))} for t in (0, 1, 2, 4, 8)]
    est_rows = [{"estimator": "ergodic_norm_sq", "t": r["t"], "eps": "", "value": r["value"],
                 "std_error": r["std_error"], "bias_note": ""} for r in out]
    return Outcome(z, 4.0, 4.0, _verdict(z <= 4.0), {"exp_functional_trend": trend},
                   {"decay": out, "estimates": est_rows})


def check_fk_contraction(ctx):
    m, dom = ctx.model, ctx.domain
    xs = np.eye(m.d)[0]
    f = Polynomial.linear(xs)
    spec = PotentialSpec(dom, ctx.p("contraction_eps"))
    n = ctx.n("n_contraction")
    t, h = ctx.p("contraction_t"), ctx.p("contraction_h")
    fk = sg.fk_contraction(m, spec, f, t, n, h, ctx.seed)
    kl = sg.killed_contraction(m, dom, f, t, n, h, ctx.seed)
    z_fk = -fk.mean / fk.std_error if fk.std_error > 0 else 0.0
    z_kl = -kl.mean / kl.std_error if kl.std_error > 0 else 0.0
    z = max(z_fk, z_kl)
    return Outcome(z, 4.0, 4.0, _verdict(z <= 4.0),
                   {"fk_margin": asdict(fk), "killed_margin": asdict(kl)},
                   {"estimates": [
                       {"estimator": "fk_contraction_margin", "t": t, "eps": spec.eps, "value": fk.mean,
                        "std_error": fk.std_error, "bias_note": ""},
                       {"estimator": "killed_contraction_margin", "t": t, "eps": "", "value": kl.mean,
                        "std_error": kl.std_error, "bias_note": ""}]})


def check_fk_resolvent4(ctx):
    m = ctx.model
    n = ctx.p("resolvent_n_1d") if m.d == 1 else ctx.p("resolvent_n_2d")
    op = ctx.grid(ctx.domain, n)
    rng = ctx.rng("resolvent4")
    fs = [rng.standard_normal(op.whole.n) for _ in range(ctx.p("n_probe_f"))]
    worst_ratio = {}
    excess = 0.0
    rows = []
    for lam in (0.5, 1.0, 2.0, 4.0):
        for eps in (0.05, 0.1, 0.2):
            for r in galerkin.resolvent_estimates(op, eps, lam, fs):
                for key in r["ratio"]:
                    worst_ratio[key] = max(worst_ratio.get(key, 0.0), r["ratio"][key])
                    excess = max(excess, r["measured"][key] - r["bound"][key])
                rows.append({"lam": lam, "eps": eps, **{f"ratio_{k}": v for k, v in r["ratio"].items()}})
    worst = max(worst_ratio.values())
    return Outcome(worst, 1.0, 1e-8, _verdict(excess <= 1e-8), {"worst_ratio": worst_ratio, "grid": n},
                   {"resolvent4": rows})


def check_kill_t0(ctx):
    m, dom = ctx.model, ctx.domain
    x = _interior_point(m, dom)
    f = Polynomial.linear(np.eye(m.d)[0], 0.3)
    est = sg.mc_killed(m, dom, f, x, 0.0, 10, ctx.p("h_kill"), ctx.seed)
    diff = abs(est.mean - float(f(x)))
    return Outcome(diff, 0.0, 0.0, _verdict(diff == 0.0 and est.std_error == 0.0), {"x": x.tolist()})


def _interior_point(m, dom):
    hs = _halfspace(dom)
    if hs is not None:
        return hs[0] * (hs[1] + 1.0)
    for cand in (np.zeros(m.d), np.eye(m.d)[0] * 2.0, -np.eye(m.d)[0] * 2.0):
        if dom.contains(cand):
            return cand
    raise ConfigError("could not find an interior starting point")


def check_kill_eigen(ctx):
    m, dom = ctx.model, ctx.domain
    eig = _eigen_halfspace(m, dom)
    if eig is None:
        return Outcome(float("nan"), None, None, OBSERVE,
                       {"note": "no closed-form Dirichlet eigenfunction: domain is not a half-space through 0 "
                                "with an eigenvector normal of A^T"})
    nvec, kappa = eig
    x = nvec * 1.0
    h = ctx.p("h_kill")
    t1 = ctx.p("kill_t")
    times = sorted(set([t1] + list(ctx.p("slope_times"))))
    f = Polynomial.linear(nvec)
    n = ctx.n("n_kill")
    steps = [int(round(t / h)) for t in times]
    S = paths.propagate(m, x, h, max(steps), n, ctx.seed, dom=dom, bridge=True, record_steps=steps,
                        purpose="grid", jobs=ctx.jobs)
    k = paths.make_step_kernel(m, h)
    col = int(np.searchsorted(S.record_steps, int(round(t1 / h))))
    vals, bias, note = sg._killed_values(m, dom, f, S, col, k)
    est = sg._estimate(vals, note, bias)
    oracle = math.exp(-kappa * t1)
    ok_value = abs(est.mean - oracle) <= 4 * est.std_error + bias
    one = lambda Y: np.ones(Y.shape[0])  # noqa: E731
    surv = []
    for t in ctx.p("slope_times"):
        c = int(np.searchsorted(S.record_steps, int(round(t / h))))
        v, b, nt = sg._killed_values(m, dom, one, S, c, k)
        surv.append(sg._estimate(v, nt, b))
    slope, slope_se = sg.log_survival_slope(ctx.p("slope_times"), surv)
    ok_slope = abs(slope + kappa) <= 0.1 * kappa
    decay = [{"t": t, "kind": "survival", "value": e.mean, "std_error": e.std_error, "exact": ""}
             for t, e in zip(ctx.p("slope_times"), surv)]
    decay.append({"t": t1, "kind": "killed_eigenfunction", "value": est.mean, "std_error": est.std_error,
                  "exact": oracle})
    est_rows = [{"estimator": "killed[<n,x>]", "t": t1, "eps": "", "value": est.mean,
                 "std_error": est.std_error, "bias_note": note}]
    est_rows += [{"estimator": "survival", "t": t, "eps": "", "value": e.mean, "std_error": e.std_error,
                  "bias_note": e.bias_note} for t, e in zip(ctx.p("slope_times"), surv)]
    return Outcome(abs(est.mean - oracle), 4 * est.std_error + bias, 4.0, _verdict(ok_value and ok_slope),
                   {"estimate": asdict(est), "oracle": oracle, "kappa": kappa, "slope": slope,
                    "slope_se": slope_se, "slope_ok": ok_slope, "value_ok": ok_value},
                   {"decay": decay, "estimates": est_rows})


def check_pen_sweep(ctx):
    m, dom = ctx.model, ctx.domain
    eig = _eigen_halfspace(m, dom)
    if eig is not None:
        nvec = eig[0]
        x = nvec * 1.0
        f = Polynomial.linear(nvec)
    else:
        x = _interior_point(m, dom)
        f = Polynomial.constant(1.0, m.d)
    rows, summ = sg.penalization_sweep(m, dom, f, x, ctx.p("kill_t"), ctx.p("pen_eps"), ctx.n("n_pen"),
                                       ctx.p("h_pen"), ctx.seed, jobs=ctx.jobs)
    final = rows[-1]["gap"]
    bound = 3 * final.std_error + summ["bias"]
    ok = summ["monotone"] and summ["final_within"]
    table = [{"eps": r["eps"], "fk": r["fk"].mean, "fk_se": r["fk"].std_error, "gap": r["gap"].mean,
              "gap_se": r["gap"].std_error, "dominance": r["dominance"]} for r in rows]
    est_rows = [{"estimator": "feynman_kac", "t": ctx.p("kill_t"), "eps": r["eps"], "value": r["fk"].mean,
                 "std_error": r["fk"].std_error, "bias_note": ""} for r in rows]
    est_rows.append({"estimator": "killed", "t": ctx.p("kill_t"), "eps": "", "value": summ["killed"].mean,
                     "std_error": summ["killed"].std_error, "bias_note": summ["killed"].bias_note})
    return Outcome(abs(final.mean), bound, 3.0, _verdict(ok),
                   {"monotone": summ["monotone"], "final_within": summ["final_within"],
                    "observed_order": summ["order"], "killed": asdict(summ["killed"]),
                    "dominance": all(r["dominance"] is not False for r in rows)},
                   {"sweep": table, "estimates": est_rows})


def check_grid_identities(ctx):
    op = ctx.grid(ctx.domain, ctx.grid_n())
    res = {w: galerkin.identity_residuals(op, w, seed=ctx.seed) for w in ("whole", "dirichlet")}
    worst = max(max(r.values()) for r in res.values())
    return Outcome(worst, 0.0, 1e-8, _verdict(worst <= 1e-8), {"residuals": res, "grid": ctx.grid_n()})


def check_grid_gradres(ctx):
    op = ctx.grid(ctx.domain, ctx.grid_n())
    val, rows = galerkin.gradient_resolvent_bound(op, np.logspace(-2, 2, 21))
    bound = math.sqrt(2.0)
    return Outcome(val, bound, 1e-6, _verdict(val <= bound + 1e-6), {"grid": ctx.grid_n()},
                   {"gradres": [{"lam": a, "value": b} for a, b in rows]})


def check_grid_ndr(ctx):
    op = ctx.grid(ctx.domain, ctx.grid_n())
    val, rows = galerkin.ndr_bound(op, np.logspace(-3, 3, 61))
    return Outcome(val, 2.0, 1e-6, _verdict(val <= 2.0 + 1e-6), {"grid": ctx.grid_n()},
                   {"ndr": [{"t": a, "value": b} for a, b in rows]})


def check_grid_bisector(ctx):
    m = ctx.model
    n = ctx.p("grid_n_1d") if m.d == 1 else ctx.p("bisector_n_2d")
    op = ctx.grid(ctx.domain, n)
    rep = galerkin.bisectoriality_scan(op, np.logspace(-3, 3, 61))
    sym = _is_symmetric(m)
    ok = (not rep.singular and math.isfinite(rep.sup_plain) and rep.max_formula_error <= 1e-8
          and (not sym or rep.sup_energy <= 1 + 1e-8))
    details = {"sup_plain": rep.sup_plain, "sup_energy": rep.sup_energy,
               "max_formula_error": rep.max_formula_error, "singular": rep.singular, "symmetric": sym,
               "grid": n}
    return Outcome(rep.sup_energy, 1.0 if sym else math.inf, 1e-8, _verdict(ok), details, {"scan": rep.rows})


def check_grid_riesz(ctx):
    m = ctx.model
    if _is_symmetric(m):
        op = ctx.grid(ctx.domain, ctx.grid_n())
        c, C = galerkin.riesz_constants(op, "dirichlet")
        dev = max(abs(c - 1 / math.sqrt(2)), abs(C - 1 / math.sqrt(2)))
        return Outcome(dev, 0.0, 1e-6, _verdict(dev <= 1e-6), {"c": c, "C": C, "grid": ctx.grid_n()})
    vals = {}
    sizes = ctx.p("riesz_n_2d") if m.d == 2 else [ctx.p("grid_n_1d") - 40, ctx.p("grid_n_1d")]
    for n in sizes:
        op = ctx.grid(ctx.domain, n)
        vals[n] = galerkin.riesz_constants(op, "dirichlet")
    (c0, C0), (c1, C1) = vals[sizes[0]], vals[sizes[1]]
    drift = max(abs(c1 - c0) / c1, abs(C1 - C0) / C1)
    ok = all(0 < c <= C < math.inf for c, C in vals.values()) and drift <= 0.05
    return Outcome(drift, 0.05, 0.05, _verdict(ok),
                   {"constants": {str(k): v for k, v in vals.items()}, "note": "values are regression baselines"})


def check_grid_poincare_whole(ctx):
    m = ctx.model
    n = ctx.p("grid_n_1d") if m.d == 1 else ctx.p("grid_n_2d")
    op = ctx.grid(WholeSpace(m.d), n, ctx.p("poincare_R"))
    res = galerkin.poincare_gap(op, "whole_meanzero")
    ok = res.variance_constant <= res.semigroup_constant * 1.02
    details = asdict(res)
    if np.allclose(m.A, m.A[0, 0] * np.eye(m.d)):
        a = -m.A[0, 0]
        details["oracle_gap"] = a
        ok = ok and abs(res.gap - a) <= 0.02 * a
    spec_rows = _spectrum_rows(op, m)
    return Outcome(res.variance_constant, res.semigroup_constant, 0.02, _verdict(ok), details, {"spectrum": spec_rows})


def _spectrum_rows(op, m, k=12):
    ev = np.linalg.eigvals(-op.whole.Lc)
    ev = ev[np.argsort(np.abs(ev))][:k]
    rows = [{"source": "grid", "re": float(z.real), "im": float(z.imag)} for z in ev]
    rows += [{"source": "chaos", "re": float(-z.real), "im": float(-z.imag)} for z in galerkin.chaos_spectrum(m, 3)]
    return rows


def check_grid_poincare_domain(ctx):
    m, dom = ctx.model, ctx.domain
    op = ctx.grid(dom, ctx.grid_n())
    res = galerkin.poincare_gap(op, "dirichlet")
    gaps = {"domain": res.gap}
    sig = float(np.sqrt(m.Q[0, 0]))
    ball = Ball(np.zeros(m.d), 1.5 * sig)
    for name, d2 in (("ball", ball), ("ball_complement", Complement(ball))):
        gaps[name] = galerkin.poincare_gap(ctx.grid(d2, ctx.grid_n()), "dirichlet").gap
    ok = all(g > 0 for g in gaps.values())
    details = {"gaps": gaps, "mu_complement": 1.0 - mu_mass(dom, m).mean}
    eig = _eigen_halfspace(m, dom)
    if eig is not None:
        details["oracle_gap"] = eig[1]
        ok = ok and abs(res.gap - eig[1]) <= 0.02 * eig[1]
    return Outcome(res.gap, 0.0, 0.02, _verdict(ok), details)


def check_grid_hinf(ctx):
    m = ctx.model
    n = ctx.p("grid_n_1d") if m.d == 1 else ctx.p("bisector_n_2d")
    op = ctx.grid(ctx.domain, n)
    rep = galerkin.hinf_norm_probe(op)
    return Outcome(rep.value, None, None, OBSERVE,
                   {"raw": rep.raw, "theta": rep.theta, "method": rep.method, "label": "probe"},
                   {"hinf": rep.rows})


# id -> (anchor, function, statistical)
CHECKS = {
    "model.duality": ("The generator $L$ of the semigroup", check_model_duality, False),
    "model.bmatrix": ("This operator satisfies", check_model_bmatrix, False),
    "paths.increment": ("$M_T|t-s|$", check_paths_increment, True),
    "sg.invariance": ("$\\int_E P(t)f\\,d\\mu_\\infty$", check_sg_invariance, True),
    "sg.oracle": ("By second quantisation", check_sg_oracle, True),
    "sg.ergodic": ("in $L^p(E,\\mu_\\infty)$", check_sg_ergodic, True),
    "fk.contraction": ("uniquely extendable to a", check_fk_contraction, True),
    "fk.resolvent4": ("the following estimates hold", check_fk_resolvent4, False),
    "kill.t0": ("$P_\\OO(0)f=f$", check_kill_t0, False),
    "kill.eigen": ("is the entrance time of", check_kill_eigen, True),
    "pen.sweep": ("$\\lim_{\\varepsilon\\downarrow 0}P_\\varepsilon(t)\\widetilde f(x)$", check_pen_sweep, True),
    "grid.identities": ("(WS)", check_grid_identities, False),
    "grid.gradres": ("$\\sqrt{\\frac{2}{\\lambda}}$", check_grid_gradres, False),
    "grid.ndr": ("Taking $\\lambda=\\frac{1}{t^2}$", check_grid_ndr, False),
    "grid.bisector": ("is called {\\em bisectorial}", check_grid_bisector, False),
    "grid.riesz": ("equivalence of the homogeneous seminorms", check_grid_riesz, False),
    "grid.poincare.whole": ("produces the constant $M^2/2w$", check_grid_poincare_whole, False),
    "grid.poincare.domain": ("we prove that $0\\in \\varrho(L_\\OO )$", check_grid_poincare_domain, False),
    "grid.hinf": ("admits a bounded holomorphic functional calculus", check_grid_hinf, False),
}

SUITES = {
    "symmetric-1d": {"A": [[-1.0]], "domain": {"kind": "half_space", "normal": [1.0], "offset": 0.0},
                     "checks": list(CHECKS)},
    "rotation-2d": {"A": [[-1.0, -1.0], [1.0, -1.0]],
                    "domain": {"kind": "half_space", "normal": [0.0, 1.0], "offset": 0.0},
                    "checks": [c for c in CHECKS if c != "kill.eigen"]},
}


def builtin_suite(name, seed, checks=None, params=None, caps=None):
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    s = SUITES[name]
    return Suite(name, s["A"], s["domain"], list(checks) if checks else list(s["checks"]), int(seed),
                 dict(params or {}), dict(caps or {}))


# ---------------------------------------------------------------------------
# runner


def _run_one(args):
    check_id, suite_spec, jobs, scale = args
    anchor, fn, statistical = CHECKS[check_id]
    m = build_model(suite_spec["A"], suite_spec["tol"])
    dom = domain_from_spec(suite_spec["domain"], m.d)
    params = {**DEFAULT_PARAMS, **suite_spec["params"]}
    for key in ("max_paths", "max_grid"):
        if key in suite_spec["caps"]:
            params[key] = suite_spec["caps"][key]
    ctx = Context(m, dom, suite_spec["seed"], params, jobs, scale)
    t0 = time.perf_counter()
    try:
        out = fn(ctx)
    except CapacityError as exc:
        return CheckResult(check_id, anchor, float("nan"), None, None, FAIL, time.perf_counter() - t0,
                           {"error": str(exc)}, {}, statistical, 1, True)
    return CheckResult(check_id, anchor, float(out.measured), out.bound, out.tol, out.verdict,
                       time.perf_counter() - t0, out.details, out.tables, statistical)


def _run_with_retry(check_id, spec, jobs):
    res = _run_one((check_id, spec, jobs, 1))
    if res.verdict == FAIL and res.statistical and not res.resource_error:
        first = res
        res = _run_one((check_id, spec, jobs, 4))
        res.attempts = 2
        res.seconds += first.seconds
        res.details["first_attempt"] = {"measured": first.measured, "bound": first.bound}
    return res


def _timeout_result(check_id, seconds):
    anchor, _, statistical = CHECKS[check_id]
    return CheckResult(check_id, anchor, float("nan"), None, None, FAIL, seconds,
                       {"error": f"timeout after {seconds:g} s"}, {}, statistical, 1, True)


def run_suite(s, *, jobs=1, check_seconds=None):
    """Run every check of ``s``; a failing check never aborts the suite.

    Model construction errors propagate before any check runs.  With
    ``check_seconds`` (or ``jobs > 1``) checks run in worker processes and
    overrunning checks are reported as resource failures.
    """
    spec = s.spec()
    build_model(spec["A"], spec["tol"])  # infrastructure errors surface here
    domain_from_spec(spec["domain"], len(spec["A"]))
    check_seconds = check_seconds or s.caps.get("check_seconds")
    ids = sorted(s.checks)
    if not ids:
        return []
    if jobs <= 1 and not check_seconds:
        return [_run_with_retry(c, spec, 1) for c in ids]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    results = {}
    with ctx.Pool(processes=max(1, jobs)) as pool:
        pending = {c: pool.apply_async(_run_with_retry, (c, spec, 1)) for c in ids}
        start = time.perf_counter()
        for c in ids:
            try:
                if check_seconds:
                    remaining = max(0.0, check_seconds * len(ids) / max(1, jobs) - (time.perf_counter() - start))
                    results[c] = pending[c].get(timeout=max(remaining, 0.01) if remaining else None)
                else:
                    results[c] = pending[c].get()
            except mp.TimeoutError:
                results[c] = _timeout_result(c, check_seconds)
        pool.terminate()
    return [results[c] for c in ids]


# ---------------------------------------------------------------------------
# output


CSV_COLUMNS = ["check_id", "anchor", "measured", "bound", "tol", "verdict", "seconds"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_csv_text(results, header, include_seconds=True):
    buf = io.StringIO()
    for k, v in header.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = CSV_COLUMNS if include_seconds else CSV_COLUMNS[:-1]
    w.writerow(cols)
    for r in results:
        row = [r.check_id, r.anchor, _fmt(r.measured), _fmt(r.bound), _fmt(r.tol), r.verdict]
        if include_seconds:
            row.append(f"{r.seconds:.3f}")
        w.writerow(row)
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_table(path, rows, header):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as fh:
        for k, v in header.items():
            fh.write(f"# {k}={v}\n")
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(_jsonable(v)) if not isinstance(v, str) else v for k, v in r.items()})


def write_results(results, out_dir, suite_spec):
    """Write ``results.csv``, ``summary.json`` and the per-kind tables; returns the written paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    h = config_hash(suite_spec)
    header = {"config_hash": h, "version": __version__, "seed": suite_spec["seed"]}
    written = []
    p = os.path.join(out_dir, "results.csv")
    with open(p, "w", newline="") as fh:
        fh.write(results_csv_text(results, header))
    written.append(p)
    tables = {}
    for r in results:
        for name, rows in r.tables.items():
            tables.setdefault(name, []).extend({"check_id": r.check_id, **row} for row in rows)
    for name, rows in sorted(tables.items()):
        tp = os.path.join(out_dir, f"{name}.csv")
        write_table(tp, rows, header)
        written.append(tp)
    summary = {
        "suite": suite_spec, "config_hash": h, "version": __version__, "seed": suite_spec["seed"],
        "counts": {v: sum(r.verdict == v for r in results) for v in (PASS, FAIL, OBSERVE)},
        "checks": [{"check_id": r.check_id, "anchor": r.anchor, "measured": r.measured, "bound": r.bound,
                    "tol": r.tol, "verdict": r.verdict, "attempts": r.attempts, "details": r.details,
                    "resource_error": r.resource_error} for r in results],
    }
    sp_ = os.path.join(out_dir, "summary.json")
    with open(sp_, "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(sp_)
    return written
