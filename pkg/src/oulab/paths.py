"""Exact-in-distribution simulation of OU paths with exit detection.

The transition over a step ``h`` is ``X(t+h) = E_h X(t) + chol(Q_h) z`` with
``E_h = exp(hA)`` and ``Q_h = int_0^h exp(sA) exp(sA^T) ds``.  Paths are
simulated in fixed-size blocks; each block draws from its own counter-based
Philox stream keyed by ``(seed, stream id)``, so results do not depend on how
blocks are distributed over workers.
"""
from __future__ import annotations

import csv
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import matkit
from .domains import Complement, HalfSpace, WholeSpace
from .exceptions import CapacityError, NumericalError

__all__ = [
    "BLOCK_SIZE",
    "RngStream",
    "StepKernel",
    "TrajectoryBatch",
    "PathSummary",
    "transition_covariance",
    "make_step_kernel",
    "exact_step",
    "euler_step",
    "simulate_batch",
    "propagate",
    "interpolated_exit_time",
    "bridge_kill_probability",
    "stationary_increment_check",
    "write_trajectory_csv",
]

BLOCK_SIZE = 1024
MAX_STEPS = 1_000_000
MAX_PATHS = 10_000_000
MAX_STORED = 50_000_000  # floats kept in a TrajectoryBatch


# ---------------------------------------------------------------------------
# random streams


def _purpose_id(purpose):
    digest = hashlib.blake2b(str(purpose).encode(), digest_size=4).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream: Philox keyed by ``(seed, stream_id)``."""

    seed: int
    stream_id: int

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not 0 <= int(self.stream_id) < 2**64:
            raise ValueError("stream id must be an unsigned 64-bit integer")

    def generator(self):
        key = (int(self.stream_id) << 64) | int(self.seed)
        return np.random.Generator(np.random.Philox(key=key))

    @classmethod
    def for_block(cls, seed, block, purpose="paths"):
        # high 32 bits tag the estimator, low 32 bits the block
        return cls(seed, (_purpose_id(purpose) << 32) | int(block))


# ---------------------------------------------------------------------------
# step kernel


def transition_covariance(A, h):
    """``(E_h, Q_h)`` by the Van Loan block exponential plus doubling.

    The block ``[[A, I], [0, -A^T]]`` is exponentiated only at a step
    ``h / 2^k`` with ``||A|| h / 2^k <= 1``, where it is accurate; the result is
    lifted with ``Q_{2s} = Q_s + E_s Q_s E_s^T`` and ``E_{2s} = E_s^2``.  Any
    square ``A`` is accepted (``A = 0`` gives ``Q_h = h I``).
    """
    A = matkit.as_matrix(A, square=True, name="A")
    if not (h > 0 and math.isfinite(h)):
        raise ValueError("step size must be positive and finite")
    d = A.shape[0]
    nrm = np.linalg.norm(A, 1)
    k = max(0, math.ceil(math.log2(nrm * h))) if nrm * h > 1 else 0
    s = h / 2**k
    C = np.zeros((2 * d, 2 * d))
    C[:d, :d] = A
    C[:d, d:] = np.eye(d)
    C[d:, d:] = -A.T
    F = sla.expm(s * C)
    E = F[:d, :d]
    Q = F[:d, d:] @ E.T
    Q = 0.5 * (Q + Q.T)
    for _ in range(k):
        Q = Q + E @ Q @ E.T
        Q = 0.5 * (Q + Q.T)
        E = E @ E
    return E, Q


@dataclass(frozen=True, eq=False)
class StepKernel:
    h: float
    E: np.ndarray  # exp(hA)
    Q: np.ndarray  # transition covariance over one step
    chol: np.ndarray  # lower factor of Q

    @property
    def d(self):
        return self.E.shape[0]


def make_step_kernel(m, h):
    """Exact transition kernel of ``m`` over a step ``h``."""
    E, Q = transition_covariance(m.A, h)
    try:
        chol = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"transition covariance over h={h:g} is not positive definite") from exc
    gap = np.linalg.eigvalsh(m.Q - Q).min()
    if gap < -1e-10 * max(1.0, np.abs(m.Q).max()):
        raise NumericalError(f"Q_h exceeds the invariant covariance (min eigenvalue {gap:.3e})")
    return StepKernel(float(h), E, Q, chol)


def exact_step(k, x, rng, z=None):
    """One exact transition from ``x`` (``(d,)`` or ``(n, d)``); ``z`` overrides the noise."""
    X = np.asarray(x, dtype=float)
    if z is None:
        z = rng.standard_normal(X.shape)
    return X @ k.E.T + np.asarray(z) @ k.chol.T


def euler_step(m, h, x, rng, z=None):
    """Euler-Maruyama step, kept only as a cross-check of the exact scheme."""
    X = np.asarray(x, dtype=float)
    if z is None:
        z = rng.standard_normal(X.shape)
    return X + h * X @ m.A.T + math.sqrt(h) * np.asarray(z)


# ---------------------------------------------------------------------------
# exit detection


def interpolated_exit_time(t0, h, s1, s2):
    """Zero of the linear interpolant of signed distances ``s1 > 0 >= s2``."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    return t0 + h * s1 / (s1 - s2)


def bridge_kill_probability(s1, s2, var_perp):
    """Probability that a bridge between interior points at distances ``s1, s2`` from a flat boundary crosses it."""
    s1 = np.maximum(np.asarray(s1, dtype=float), 0.0)
    s2 = np.maximum(np.asarray(s2, dtype=float), 0.0)
    return np.exp(-2.0 * s1 * s2 / var_perp)


def _bridge_normal(dom):
    if isinstance(dom, HalfSpace):
        return dom.normal
    if isinstance(dom, Complement) and isinstance(dom.inner, HalfSpace):
        return -dom.inner.normal
    return None


def bias_budget(k, dom, mean_abs_surviving):
    """Heuristic O(sqrt h) exit-detection bias: ``0.5826 sigma_perp sqrt(h) E|f| 1_surv``.

    0.5826 is the overshoot constant of discretely monitored Brownian motion;
    ``sigma_perp^2`` the per-step variance along the boundary normal (largest
    eigenvalue of ``Q_h`` when the boundary is curved).
    """
    n = _bridge_normal(dom)
    var = float(n @ k.Q @ n) if n is not None else float(np.linalg.eigvalsh(k.Q).max())
    return 0.5826 * math.sqrt(var) * abs(mean_abs_surviving)


# ---------------------------------------------------------------------------
# streaming propagation


@dataclass(eq=False)
class PathSummary:
    """Per-path quantities recorded by :func:`propagate` at the requested step indices."""

    record_steps: np.ndarray  # (R,)
    times: np.ndarray  # (R,)
    states: np.ndarray  # (n, R, d)
    alive: np.ndarray  # (n, R)
    exit_time: np.ndarray  # (n,)
    integrals: np.ndarray  # (n, P, R) trapezoid integrals of each potential
    path_ids: np.ndarray  # (n,)

    @property
    def n(self):
        return self.states.shape[0]


def _check_caps(n_steps, n_paths):
    if n_steps > MAX_STEPS:
        raise CapacityError(f"{n_steps} steps exceed the limit {MAX_STEPS}")
    if n_paths > MAX_PATHS:
        raise CapacityError(f"{n_paths} paths exceed the limit {MAX_PATHS}")


def _run_block(args):
    (m, k, x0, n_steps, rec, block, size, seed, purpose, dom, bridge, potentials, scheme, full) = args
    rng = RngStream.for_block(seed, block, purpose).generator()
    d = k.d
    X = np.array(np.broadcast_to(x0, (size, d)), dtype=float)
    h = k.h
    rec_pos = {int(s): i for i, s in enumerate(rec)}
    R = len(rec)
    P = len(potentials)
    states = np.empty((size, R, d))
    alive_rec = np.ones((size, R), dtype=bool)
    integ_rec = np.zeros((size, P, R))
    traj = np.empty((size, n_steps + 1, d)) if full else None
    alive_traj = np.ones((size, n_steps + 1), dtype=bool) if full else None

    exit_time = np.full(size, np.inf)
    use_dom = dom is not None and not isinstance(dom, WholeSpace)
    normal = _bridge_normal(dom) if (use_dom and bridge) else None
    var_perp = float(normal @ k.Q @ normal) if normal is not None else None
    alive = np.ones(size, dtype=bool)
    if use_dom:
        sd = dom.signed_distance(X)
        dead0 = sd <= 0
        alive[dead0] = False
        exit_time[dead0] = 0.0
    Vprev = [np.asarray(V(X), dtype=float) for V in potentials]
    integ = np.zeros((P, size))
    if 0 in rec_pos:
        i = rec_pos[0]
        states[:, i] = X
        alive_rec[:, i] = alive
    if full:
        traj[:, 0] = X
        alive_traj[:, 0] = alive

    chunk = max(1, min(n_steps, 4_000_000 // max(size * d, 1)))
    done = 0
    while done < n_steps:
        c = min(chunk, n_steps - done)
        Z = rng.standard_normal((c, size, d))
        U = rng.random((c, size)) if normal is not None else None
        for j in range(c):
            step = done + j + 1
            if scheme == "exact":
                X = X @ k.E.T + Z[j] @ k.chol.T
            else:
                X = X + h * X @ m.A.T + math.sqrt(h) * Z[j]
            if use_dom:
                sd_new = dom.signed_distance(X)
                was = alive.copy()
                hit = was & (sd_new <= 0)
                if hit.any():
                    exit_time[hit] = interpolated_exit_time((step - 1) * h, h, sd[hit], sd_new[hit])
                    alive[hit] = False
                if normal is not None:
                    inner = was & ~hit
                    p = bridge_kill_probability(sd[inner], sd_new[inner], var_perp)
                    killed = U[j][inner] < p
                    if killed.any():
                        idx = np.flatnonzero(inner)[killed]
                        a, b = sd[idx], sd_new[idx]
                        # minimum of the bridge placed by the distance ratio
                        exit_time[idx] = (step - 1) * h + h * a / (a + b)
                        alive[idx] = False
                sd = sd_new
            for q, V in enumerate(potentials):
                Vn = np.asarray(V(X), dtype=float)
                integ[q] += 0.5 * h * (Vprev[q] + Vn)
                Vprev[q] = Vn
            if step in rec_pos:
                i = rec_pos[step]
                states[:, i] = X
                alive_rec[:, i] = alive
                integ_rec[:, :, i] = integ.T
            if full:
                traj[:, step] = X
                alive_traj[:, step] = alive
        done += c
    return states, alive_rec, exit_time, integ_rec, traj, alive_traj


def _blocks(n_paths, block_size):
    nb = -(-n_paths // block_size)
    return [(b, min(block_size, n_paths - b * block_size)) for b in range(nb)]


def _x0_block(x0, b, size, block_size):
    X0 = np.asarray(x0, dtype=float)
    if X0.ndim == 1:
        return X0
    return X0[b * block_size : b * block_size + size]


def _execute(tasks, jobs):
    if jobs <= 1 or len(tasks) == 1:
        return [_run_block(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_block, tasks))


def propagate(
    m,
    x0,
    h,
    n_steps,
    n_paths,
    seed,
    *,
    dom=None,
    bridge=True,
    potentials=(),
    record_steps=None,
    purpose="paths",
    scheme="exact",
    jobs=1,
    block_size=BLOCK_SIZE,
):
    """Stream ``n_paths`` paths for ``n_steps`` steps, keeping only recorded steps.

    ``x0`` is a point or an ``(n_paths, d)`` array of starting points.  Paths
    keep evolving after they leave ``dom``; ``alive`` records whether they have
    done so, which lets killed and Feynman-Kac functionals share randomness.
    """
    _check_caps(n_steps, n_paths)
    if scheme not in ("exact", "euler"):
        raise ValueError(f"unknown scheme {scheme!r}")
    k = make_step_kernel(m, h)
    rec = np.array([n_steps] if record_steps is None else sorted(set(int(s) for s in record_steps)))
    if rec.size and (rec.min() < 0 or rec.max() > n_steps):
        raise ValueError("record steps outside [0, n_steps]")
    X0 = np.asarray(x0, dtype=float)
    if X0.ndim == 2 and X0.shape[0] != n_paths:
        raise ValueError("per-path starting points must have n_paths rows")
    tasks = [
        (m, k, _x0_block(X0, b, size, block_size), n_steps, rec, b, size, seed, purpose,
         dom, bridge, tuple(potentials), scheme, False)
        for b, size in _blocks(n_paths, block_size)
    ]
    parts = _execute(tasks, jobs)
    return PathSummary(
        record_steps=rec,
        times=rec * h,
        states=np.concatenate([p[0] for p in parts]),
        alive=np.concatenate([p[1] for p in parts]),
        exit_time=np.concatenate([p[2] for p in parts]),
        integrals=np.concatenate([p[3] for p in parts]),
        path_ids=np.arange(n_paths),
    )


# ---------------------------------------------------------------------------
# stored batches


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    times: np.ndarray  # (K+1,)
    states: np.ndarray  # (n, K+1, d)
    alive: np.ndarray  # (n, K+1)
    exit_time: np.ndarray  # (n,)
    rng_stream_ids: np.ndarray  # (n_blocks,)
    seed: int = 0
    block_size: int = BLOCK_SIZE
    kernel: StepKernel | None = field(default=None, repr=False)

    @property
    def n_paths(self):
        return self.states.shape[0]


def simulate_batch(m, x0, t_end, h, n_paths, dom=None, seed=0, *, bridge=None, scheme="exact",
                   jobs=1, block_size=BLOCK_SIZE):
    """Simulate and store whole trajectories on the grid ``0, h, ..., t_end``.

    Bridge correction defaults to on for half-spaces and their complements.
    """
    n_steps = int(round(t_end / h))
    if n_steps < 1 or abs(n_steps * h - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be a positive multiple of h")
    _check_caps(n_steps, n_paths)
    d = m.d
    if n_paths * (n_steps + 1) * d > MAX_STORED:
        raise CapacityError("trajectory storage limit exceeded; use propagate() for streaming")
    if bridge is None:
        bridge = _bridge_normal(dom) is not None
    k = make_step_kernel(m, h)
    X0 = np.asarray(x0, dtype=float)
    blocks = _blocks(n_paths, block_size)
    tasks = [
        (m, k, _x0_block(X0, b, size, block_size), n_steps, np.array([n_steps]), b, size, seed,
         "paths", dom, bridge, (), scheme, True)
        for b, size in blocks
    ]
    parts = _execute(tasks, jobs)
    if not parts:  # zero paths: empty arrays of the right shape
        parts = [(None, None, np.zeros(0), None, np.zeros((0, n_steps + 1, d)),
                  np.zeros((0, n_steps + 1), dtype=bool))]
    return TrajectoryBatch(
        times=np.arange(n_steps + 1) * h,
        states=np.concatenate([p[4] for p in parts]),
        alive=np.concatenate([p[5] for p in parts]),
        exit_time=np.concatenate([p[2] for p in parts]),
        rng_stream_ids=np.array([RngStream.for_block(seed, b).stream_id for b, _ in blocks], dtype=np.uint64),
        seed=int(seed),
        block_size=block_size,
        kernel=k,
    )


def write_trajectory_csv(batch, path):
    """Dump a batch as rows ``(path, t, x1..xd, alive)``."""
    n, K1, d = batch.states.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "t"] + [f"x{i + 1}" for i in range(d)] + ["alive"])
        for p in range(n):
            for j in range(K1):
                w.writerow([p, repr(float(batch.times[j]))]
                           + [repr(float(v)) for v in batch.states[p, j]]
                           + [int(batch.alive[p, j])])


# ---------------------------------------------------------------------------
# stationary increments


def growth_sup(A, T, n=400):
    """``sup_{0 <= t <= T} ||exp(tA)||`` on a uniform grid (at least 1)."""
    return max(1.0, max(np.linalg.norm(matkit.expm(A, t), 2) for t in np.linspace(0.0, T, n)))


def stationary_increment_check(m, xstar, pairs, n_paths, seed, *, n_se=4.0):
    """Second moments ``E <X(t) - X(s), x*>^2`` for a stationary start.

    Returns a list of dicts with the Monte-Carlo estimate, its standard
    error, the closed form ``2 <Q (I - exp((t-s)A^T)) x*, x*>``, the linear
    bound ``M_T |t-s| ||B|| 2 ||x*||^2`` (``T`` the largest time) and a verdict.
    """
    xs = np.asarray(xstar, dtype=float).ravel()
    T = max(max(s, t) for s, t in pairs)
    MT = growth_sup(m.A, max(T, 1e-12))
    nB = matkit.op_norm(m.B)
    rows = []
    for idx, (s, t) in enumerate(pairs):
        tau = abs(t - s)
        exact = 2.0 * float(xs @ m.Q @ (xs - matkit.expm(m.A.T, tau) @ xs))
        bound = MT * tau * nB * 2.0 * float(xs @ xs)
        if tau == 0:
            est, se = 0.0, 0.0
        else:
            rng = RngStream.for_block(seed, idx, "increment").generator()
            X0 = rng.standard_normal((n_paths, m.d)) @ m.chol_Q.T
            E, Qt = transition_covariance(m.A, tau)
            X1 = X0 @ E.T + rng.standard_normal((n_paths, m.d)) @ np.linalg.cholesky(Qt).T
            sq = ((X1 - X0) @ xs) ** 2
            est, se = float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(n_paths))
        ok = abs(est - exact) <= n_se * se + 1e-12 and exact <= bound + 1e-12 and est <= bound + n_se * se
        rows.append({"s": s, "t": t, "estimate": est, "std_error": se, "closed_form": exact,
                     "bound": bound, "M_T": MT, "pass": bool(ok)})
    return rows
