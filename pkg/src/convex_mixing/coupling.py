"""Mirror-coupled reflected Brownian paths and the 1D comparison process.

Two reflected Brownian motions X and Y are co-driven: X receives the
Gaussian increment dW, Y receives its Householder reflection
(I - 2 eta eta^T) dW across the hyperplane normal to eta = (X-Y)/|X-Y|.
Between boundary visits the separation r = |X - Y| then moves as
r0 + 2<eta, dW>, a one-dimensional Brownian motion run at rate 4;
boundary pushes only ever decrease r.  The pair is declared coupled
when r falls below a threshold epsilon_couple (default 0.5 sqrt(h)),
with the crossing time interpolated linearly inside the step.

Reflection is realized by one Euclidean projection per Euler step
(projected-Euler / Skorokhod-projection scheme), which is what makes
the construction work verbatim in any convex body.

Every random draw is addressed by (step, replicate, slot) through a
counter-based stream, and all per-replicate arithmetic is elementwise
or per-row, so a replicate's trajectory is bit-identical whether it
runs alone, inside a batch, or split across threads.  Slots [0, dim)
carry the Gaussian increments; higher slots are reserved for auxiliary
uniforms (initial-condition sampling, bridge corrections) so the two
never collide.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import ConvexBody
from .streams import MAX_STEPS, as_noise

DEFAULT_EPSILON_FACTOR = 0.5   # epsilon_couple = 0.5 sqrt(h) unless overridden
MIN_EPSILON_FACTOR = 0.1       # below sqrt(h)/10 discretization noise dominates
TOL_PHI_FACTOR = 5.0           # per-step phi non-increase allowance: 5 sqrt(h)
K_CAP = 1e6                    # |Gamma(z)/z| cap for the Z scheme below z_floor
Z_FLOOR_FACTOR = 1e-8          # z_floor = 1e-8 * r0
SEPARATION_SLACK = 1e-9        # r may exceed the diameter by at most this


class DriftEnvelopeError(RuntimeError):
    """Envelope audit found Gamma(|x-y|) < <x-y, mu(x)-mu(y)> beyond tolerance."""


def _row_dots(a, b):
    return np.einsum("ij,ij->i", a, b)


def _row_norms(a):
    return np.sqrt(np.einsum("ij,ij->i", a, a))


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


# ---------------------------------------------------------------------------
# States

@dataclass(frozen=True)
class PathState:
    """One reflected path: position, clock, and accumulated boundary push.

    local_pushes sums the projection displacements |candidate - projected|,
    the discrete stand-in for the boundary local-time magnitude.
    rng_cursor counts consumed steps; it is bookkeeping, not randomness.
    """

    position: np.ndarray
    time: float = 0.0
    local_pushes: float = 0.0
    rng_cursor: int = 0


@dataclass(frozen=True)
class CoupledState:
    """A mirror-coupled pair with its separation diagnostics.

    eta is the unit vector (X - Y)/r while the pair is apart and None
    afterwards.  phi accumulates the boundary contribution of the
    decomposition r_t = r_0 + phi_t + B(qv_clock): each step adds
    (r_new - r_old) - 2<eta, dW>, which vanishes on interior steps and
    is non-positive (up to discretization) at boundary visits.
    qv_clock accumulates the realized quadratic variation 4<eta, dW>^2
    of the separation martingale, whose mean slope is 4 per unit time.
    epsilon_couple rides along so single-step drivers know the merge
    threshold.
    """

    x_path: PathState
    y_path: PathState
    eta: Optional[np.ndarray]
    r: float
    phi: float = 0.0
    qv_clock: float = 0.0
    coupled_at: Optional[float] = None
    epsilon_couple: float = 0.0


def couple_states(body: ConvexBody, x, y, epsilon_couple, time=0.0) -> CoupledState:
    """Initial CoupledState for starts x, y in the closed body."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not body.contains(x) or not body.contains(y):
        raise ValueError("both starts must lie in the closed body")
    if not epsilon_couple >= 0:
        raise ValueError("epsilon_couple must be nonnegative")
    r = float(_row_norms((x - y)[None, :])[0])
    xs = PathState(position=x, time=time)
    ys = PathState(position=y, time=time)
    if r <= epsilon_couple:
        return CoupledState(xs, PathState(position=x, time=time), None, 0.0,
                            coupled_at=time, epsilon_couple=epsilon_couple)
    return CoupledState(xs, ys, (x - y) / r, r, epsilon_couple=epsilon_couple)


# ---------------------------------------------------------------------------
# Drift models

@dataclass(frozen=True)
class DriftModel:
    """A Lipschitz drift field mu with a scalar envelope gamma.

    gamma must dominate the pair interaction:
    gamma(|x - y|) >= <x - y, mu(x) - mu(y)>.  Both callables must be
    vectorized: mu maps (n, dim) arrays to (n, dim) rowwise, gamma maps
    r-arrays elementwise, so batch and single evaluations agree bitwise.
    The declared Lipschitz constants are informational (gamma is often
    only locally Lipschitz; audits stay inside the body's diameter).
    """

    mu: Callable
    gamma: Callable
    label: str
    mu_lipschitz: Optional[float] = None
    gamma_lipschitz: Optional[float] = None

    def audit_envelope(self, body: ConvexBody, n_pairs=10_000, rng=None,
                       tol=1e-9):
        """Sample pairs in the body and check the envelope inequality.

        Returns the worst slack gamma(r) - <x-y, mu(x)-mu(y)> observed;
        raises DriftEnvelopeError if it dips below -tol.  Pairs stay
        inside the body, so r ranges over [0, diameter] only.
        """
        if n_pairs < 1:
            raise ValueError("need at least one pair")
        if rng is None or isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(0 if rng is None else int(rng))
        xs, _ = body.sample_uniform_many(int(n_pairs), rng)
        ys, _ = body.sample_uniform_many(int(n_pairs), rng)
        diff = xs - ys
        r = _row_norms(diff)
        slack = np.asarray(self.gamma(r), dtype=float) - _row_dots(
            diff, np.asarray(self.mu(xs), dtype=float)
            - np.asarray(self.mu(ys), dtype=float))
        worst = float(slack.min())
        if worst < -tol:
            raise DriftEnvelopeError(
                f"drift model {self.label!r}: envelope violated by "
                f"{-worst:.3e} on {int((slack < -tol).sum())} of "
                f"{n_pairs} sampled pairs")
        return worst


def ou_drift(theta) -> DriftModel:
    """Linear restoring drift mu(x) = -theta x with exact envelope -theta r^2.

    <x-y, mu(x)-mu(y)> = -theta |x-y|^2, so the envelope holds with
    equality; the audit slack is zero to rounding.
    """
    theta = float(theta)
    return DriftModel(
        mu=lambda p: -theta * p,
        gamma=lambda r: -theta * r * r,
        label=f"ou(theta={theta:g})",
        mu_lipschitz=abs(theta),
        gamma_lipschitz=None,  # locally Lipschitz: 2 theta d on [0, d]
    )


# ---------------------------------------------------------------------------
# Single-step operations

def step_reflected(body: ConvexBody, state: PathState, drift, h,
                   gaussian) -> PathState:
    """One projected Euler step; `gaussian` is the full increment sqrt(h) N(0, I).

    The caller supplies the increment so a coupled partner can receive
    its mirror image of the same draw.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    pos = np.asarray(state.position, dtype=float)[None, :]
    dw = np.asarray(gaussian, dtype=float)[None, :]
    if drift is None:
        cand = pos + dw
    else:
        cand = pos + drift.mu(pos) * h + dw
    new = body.project(cand)
    push = float(_row_norms(cand - new)[0])
    return PathState(position=new[0], time=state.time + h,
                     local_pushes=state.local_pushes + push,
                     rng_cursor=state.rng_cursor + 1)


def mirror_step(body: ConvexBody, cs: CoupledState, drift, h,
                gaussian) -> CoupledState:
    """Advance a coupled pair one step: X gets dW, Y gets the Householder flip.

    While both paths stay interior the signed separation moves to
    r + 2<eta, dW> exactly; a boundary visit breaks collinearity and the
    separation is recomputed from the positions.  The pair couples when
    the separation reaches epsilon_couple (signed on interior steps, so
    an overshoot through zero still counts); the crossing time is
    interpolated linearly within the step and Y is glued to X.
    """
    if cs.coupled_at is not None:
        raise ValueError("pair already coupled")
    dw = np.asarray(gaussian, dtype=float)
    eta = cs.eta
    inc = float(_row_dots(eta[None, :], dw[None, :])[0])
    t_old = cs.x_path.time

    x_new = step_reflected(body, cs.x_path, drift, h, dw)
    y_new = step_reflected(body, cs.y_path, drift, h, dw - 2.0 * inc * eta)
    push_x = x_new.local_pushes - cs.x_path.local_pushes
    push_y = y_new.local_pushes - cs.y_path.local_pushes

    diff = x_new.position - y_new.position
    r_geo = float(_row_norms(diff[None, :])[0])
    interior = push_x == 0.0 and push_y == 0.0
    s = cs.r + 2.0 * inc if interior else r_geo

    if s <= cs.epsilon_couple:
        den = cs.r - s
        u = (cs.r - cs.epsilon_couple) / den if den > 0.0 else 1.0
        u = min(max(u, 0.0), 1.0)
        glued = PathState(position=x_new.position, time=y_new.time,
                          local_pushes=y_new.local_pushes,
                          rng_cursor=y_new.rng_cursor)
        return CoupledState(x_new, glued, None, 0.0, phi=cs.phi,
                            qv_clock=cs.qv_clock, coupled_at=t_old + u * h,
                            epsilon_couple=cs.epsilon_couple)

    phi_inc = (r_geo - cs.r) - 2.0 * inc
    return CoupledState(x_new, y_new, diff / r_geo, r_geo,
                        phi=cs.phi + phi_inc,
                        qv_clock=cs.qv_clock + 4.0 * inc * inc,
                        epsilon_couple=cs.epsilon_couple)


# ---------------------------------------------------------------------------
# Replicate outcomes

@dataclass(frozen=True)
class CouplingDiagnostics:
    """Per-replicate invariants gathered while stepping.

    phi must be non-increasing, so max_phi_increment is the quantity a
    violation would show up in (it should stay below the per-step
    discretization allowance 5 sqrt(h)); min_phi_increment measures how
    hard the boundary pushed the pair together.  Both are -/+inf
    identity values when no uncoupled step completed.  The boundary dot
    products are +/-inf identity elements when the matching path never
    projected: max_eta_dot_n_m tracks <eta, n> against the outward
    normal at Y's projection events (should be <= 0 up to tolerance);
    min_eta_dot_n_l is the X-side mirror image (>= 0).
    """

    max_r: float
    min_phi_increment: float
    max_phi_increment: float
    boundary_events: int
    max_eta_dot_n_m: float
    min_eta_dot_n_l: float


@dataclass(frozen=True)
class CouplingOutcome:
    replicate: int
    tau: float
    censored: bool
    step_size: float
    epsilon_couple: float
    steps: int
    diagnostics: CouplingDiagnostics


def _coupling_engine(body, x, y, replicate_indices, drift, h, eps, t_max,
                     noise, trace=None):
    """Advance a block of replicates to coupling or censoring.

    Returns a list of CouplingOutcome in the order of replicate_indices.
    When `trace` is a list the block must be a single replicate and one
    row per step is appended.
    """
    idx = np.asarray(replicate_indices, dtype=np.int64)
    n = idx.size
    dim = body.dimension
    sqrt_h = math.sqrt(h)
    n_steps = int(math.ceil(t_max / h - 1e-9))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r0 = float(_row_norms((x - y)[None, :])[0])

    def outcome(i, tau, censored, steps, diag):
        return CouplingOutcome(replicate=int(idx[i]), tau=float(tau),
                               censored=bool(censored), step_size=h,
                               epsilon_couple=eps, steps=int(steps),
                               diagnostics=diag)

    if r0 <= eps:
        diag = CouplingDiagnostics(r0, math.inf, -math.inf, 0, -math.inf,
                                   math.inf)
        return [outcome(i, 0.0, False, 0, diag) for i in range(n)]

    X = np.tile(x, (n, 1))
    Y = np.tile(y, (n, 1))
    eta = np.tile((x - y) / r0, (n, 1))
    r = np.full(n, r0)
    phi = np.zeros(n)
    qv = np.zeros(n)
    tau = np.full(n, float(n_steps) * h)
    censored = np.ones(n, dtype=bool)
    steps_used = np.full(n, n_steps, dtype=np.int64)
    max_r = np.full(n, r0)
    min_phi_inc = np.full(n, math.inf)
    max_phi_inc = np.full(n, -math.inf)
    events = np.zeros(n, dtype=np.int64)
    max_nm = np.full(n, -math.inf)
    min_nl = np.full(n, math.inf)
    slots = np.arange(dim)
    alive = np.arange(n)

    if trace is not None:
        if n != 1:
            raise ValueError("tracing needs a single replicate")
        trace.append((0, 0.0, X[0].copy(), Y[0].copy(), r0, 0.0, 0.0,
                      0.0, 0.0))

    # clock accumulates by repeated addition, exactly as PathState.time
    # does, so interpolated coupling times match mirror_step bit for bit
    t_old = 0.0
    for step in range(n_steps):
        if alive.size == 0:
            break
        dw = noise.normals(step, idx[alive], slots) * sqrt_h
        eta_a = eta[alive]
        inc = _row_dots(eta_a, dw)
        Xa = X[alive]
        Ya = Y[alive]
        if drift is None:
            cand_x = Xa + dw
        else:
            cand_x = Xa + drift.mu(Xa) * h + dw
        new_x = body.project(cand_x)
        out_x = cand_x - new_x
        push_x = _row_norms(out_x)
        dw_y = dw - (2.0 * inc)[:, None] * eta_a
        if drift is None:
            cand_y = Ya + dw_y
        else:
            cand_y = Ya + drift.mu(Ya) * h + dw_y
        new_y = body.project(cand_y)
        out_y = cand_y - new_y
        push_y = _row_norms(out_y)

        diff = new_x - new_y
        r_geo = _row_norms(diff)
        r_old = r[alive]
        interior = (push_x == 0.0) & (push_y == 0.0)
        s = np.where(interior, r_old + 2.0 * inc, r_geo)
        hit = s <= eps

        max_r[alive] = np.maximum(max_r[alive], r_geo)
        events[alive] += (push_x > 0.0).astype(np.int64)
        events[alive] += (push_y > 0.0).astype(np.int64)

        den = r_old - s
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(den > 0.0, (r_old - eps) / den, 1.0)
        u = np.clip(u, 0.0, 1.0)

        hit_idx = alive[hit]
        if hit_idx.size:
            tau[hit_idx] = t_old + u[hit] * h
            censored[hit_idx] = False
            steps_used[hit_idx] = step + 1
            X[hit_idx] = new_x[hit]
            Y[hit_idx] = new_x[hit]
            r[hit_idx] = 0.0

        live = ~hit
        live_idx = alive[live]
        if live_idx.size:
            X[live_idx] = new_x[live]
            Y[live_idx] = new_y[live]
            r[live_idx] = r_geo[live]
            eta_new = diff[live] / r_geo[live][:, None]
            eta[live_idx] = eta_new
            phi_inc = (r_geo - r_old) - 2.0 * inc
            phi[live_idx] += phi_inc[live]
            qv[live_idx] += 4.0 * inc[live] ** 2
            min_phi_inc[live_idx] = np.minimum(min_phi_inc[live_idx],
                                               phi_inc[live])
            max_phi_inc[live_idx] = np.maximum(max_phi_inc[live_idx],
                                               phi_inc[live])
            py = push_y[live]
            if np.any(py > 0.0):
                sel = py > 0.0
                dots = _row_dots(eta_new[sel], out_y[live][sel] / py[sel, None])
                tgt = live_idx[sel]
                max_nm[tgt] = np.maximum(max_nm[tgt], dots)
            px = push_x[live]
            if np.any(px > 0.0):
                sel = px > 0.0
                dots = _row_dots(eta_new[sel], out_x[live][sel] / px[sel, None])
                tgt = live_idx[sel]
                min_nl[tgt] = np.minimum(min_nl[tgt], dots)

        if trace is not None:
            trace.append((step + 1, t_old + h, X[0].copy(), Y[0].copy(),
                          float(r[0]), float(phi[0]), float(qv[0]),
                          float(push_x[0]), float(push_y[0])))
            if hit_idx.size:
                break

        alive = live_idx
        t_old = t_old + h

    return [outcome(i, tau[i], censored[i], steps_used[i],
                    CouplingDiagnostics(float(max_r[i]),
                                        float(min_phi_inc[i]),
                                        float(max_phi_inc[i]),
                                        int(events[i]),
                                        float(max_nm[i]),
                                        float(min_nl[i])))
            for i in range(n)]


def _validate_coupling_params(body, x, y, h, epsilon_couple, t_max):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not body.contains(x) or not body.contains(y):
        raise ValueError("both starts must lie in the closed body")
    d = body.diameter
    if not h > 0 or h > 1e-3 * d * d:
        raise ValueError(f"need 0 < h <= 1e-3 d^2 = {1e-3 * d * d:g}")
    eps = (DEFAULT_EPSILON_FACTOR * math.sqrt(h)
           if epsilon_couple is None else float(epsilon_couple))
    if eps < MIN_EPSILON_FACTOR * math.sqrt(h):
        raise ValueError("epsilon_couple below sqrt(h)/10: discretization "
                         "noise dominates the merge decision")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    n_steps = int(math.ceil(t_max / h - 1e-9))
    if n_steps >= MAX_STEPS:
        raise ValueError("t_max/h exceeds the stream's step range")
    return x, y, eps


def simulate_coupling_time(body: ConvexBody, x, y, drift=None, *, h,
                           epsilon_couple=None, t_max, rng, replicate=0,
                           trace_path=None) -> CouplingOutcome:
    """Run one mirror-coupled replicate to coupling or censoring at t_max.

    Deterministic given (rng seed, parameters, replicate index); the
    result is bit-identical to the same replicate inside any batch.
    With trace_path set, a per-step CSV
    (step,t,x...,y...,r,phi,qv_clock,proj_x,proj_y) is written.
    """
    x, y, eps = _validate_coupling_params(body, x, y, h, epsilon_couple, t_max)
    noise = as_noise(rng)
    trace = [] if trace_path is not None else None
    out = _coupling_engine(body, x, y, [replicate], drift, h, eps, t_max,
                           noise, trace=trace)[0]
    if trace_path is not None:
        dim = body.dimension
        head = (["step", "t"] + [f"x{i}" for i in range(dim)]
                + [f"y{i}" for i in range(dim)]
                + ["r", "phi", "qv_clock", "proj_x", "proj_y"])
        lines = [",".join(head)]
        for (step, t, xv, yv, rv, pv, qvv, px, py) in trace:
            cells = ([str(step), _fmt(t)] + [_fmt(c) for c in xv]
                     + [_fmt(c) for c in yv]
                     + [_fmt(rv), _fmt(pv), _fmt(qvv), _fmt(px), _fmt(py)])
            lines.append(",".join(cells))
        with open(trace_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    return out


def run_coupling_replicates(body: ConvexBody, x, y, n_replicates, *, h,
                            epsilon_couple=None, t_max, rng, drift=None,
                            threads=None, replicate_start=0):
    """Mirror-coupling outcomes for replicates [start, start + n).

    Replicates are independent; `threads` only chunks the work, and the
    counter-addressed noise makes the outcomes invariant to the
    chunking.  Results are ordered by replicate index.
    """
    if n_replicates < 1:
        raise ValueError("need at least one replicate")
    x, y, eps = _validate_coupling_params(body, x, y, h, epsilon_couple, t_max)
    noise = as_noise(rng)
    indices = np.arange(replicate_start, replicate_start + int(n_replicates))
    workers = max(1, int(threads)) if threads else 1
    if workers == 1 or n_replicates == 1:
        return _coupling_engine(body, x, y, indices, drift, h, eps, t_max,
                                noise)
    chunks = np.array_split(indices, min(workers, int(n_replicates)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(
            lambda c: _coupling_engine(body, x, y, c, drift, h, eps, t_max,
                                       noise), chunks))
    out = []
    for p in parts:
        out.extend(p)
    return out


def outcome_times(outcomes):
    """(times, censored) arrays from outcomes, ordered by replicate index."""
    ordered = sorted(outcomes, key=lambda o: o.replicate)
    times = np.array([o.tau for o in ordered])
    cens = np.array([o.censored for o in ordered], dtype=bool)
    return times, cens


def write_outcomes_csv(outcomes, path, preamble=()):
    """Outcome CSV: replicate,tau,censored,steps,boundary_events.

    `preamble` lines are written first, each prefixed with '# '.
    """
    lines = ["# " + p for p in preamble]
    lines.append("replicate,tau,censored,steps,boundary_events")
    for o in sorted(outcomes, key=lambda o: o.replicate):
        lines.append(",".join([
            str(o.replicate), _fmt(o.tau), str(int(o.censored)),
            str(o.steps), str(o.diagnostics.boundary_events)]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Plain reflected paths (no coupling)

def simulate_reflected_paths(body: ConvexBody, starts, t_grid, h, rng,
                             drift=None):
    """Positions of independent reflected paths at the grid times.

    starts: (n, dim) initial points (row i belongs to replicate i).
    t_grid must align with multiples of h.  Returns (n, len(t_grid), dim).
    Replicate i consumes slots [0, dim) of its own stream, so adding or
    removing other rows never changes row i.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if not body.contains(starts).all():
        raise ValueError("all starts must lie in the closed body")
    if not h > 0:
        raise ValueError("h must be positive")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be ascending and nonempty")
    if t_grid[0] < 0:
        raise ValueError("t_grid must be nonnegative")
    marks = np.rint(t_grid / h).astype(np.int64)
    if np.any(np.abs(marks * h - t_grid) > 1e-9 * np.maximum(1.0, t_grid)):
        raise ValueError("every t in t_grid must be a multiple of h")
    n_steps = int(marks[-1])
    if n_steps >= MAX_STEPS:
        raise ValueError("t_grid[-1]/h exceeds the stream's step range")
    noise = as_noise(rng)
    n, dim = starts.shape
    if dim != body.dimension:
        raise ValueError("starts have the wrong dimension")
    slots = np.arange(dim)
    idx = np.arange(n)
    sqrt_h = math.sqrt(h)

    out = np.empty((n, t_grid.size, dim))
    pos = starts.copy()
    next_mark = 0
    if marks[0] == 0:
        out[:, 0, :] = pos
        next_mark = 1
    for step in range(n_steps):
        dw = noise.normals(step, idx, slots) * sqrt_h
        if drift is None:
            cand = pos + dw
        else:
            cand = pos + drift.mu(pos) * h + dw
        pos = body.project(cand)
        while next_mark < marks.size and marks[next_mark] == step + 1:
            out[:, next_mark, :] = pos
            next_mark += 1
    return out


def fold_reflect_1d(d, w):
    """Reflect an unconstrained value into [0, d] by double folding.

    m = w mod 2d, result = min(m, 2d - m).  Applied to exact Brownian
    marginals this gives exact reflected-Brownian marginals on [0, d]:
    the zero-discretization-bias route in one dimension.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    m = np.mod(np.asarray(w, dtype=float), 2.0 * d)
    return np.minimum(m, 2.0 * d - m)


# ---------------------------------------------------------------------------
# One-dimensional comparison process

def _z_engine(gamma, r0, replicate_indices, h, t_max, noise):
    """Euler scheme dZ = (Gamma(Z)/Z) dt + dB(4t), absorbed at 0."""
    idx = np.asarray(replicate_indices, dtype=np.int64)
    n = idx.size
    n_steps = int(math.ceil(t_max / h - 1e-9))
    z_floor = Z_FLOOR_FACTOR * r0
    noise_scale = math.sqrt(4.0 * h)
    z = np.full(n, float(r0))
    tau = np.full(n, float(n_steps) * h)
    censored = np.ones(n, dtype=bool)
    alive = np.arange(n)
    for step in range(n_steps):
        if alive.size == 0:
            break
        za = z[alive]
        dwz = noise.normals(step, idx[alive], [0])[:, 0] * noise_scale
        g = np.asarray(gamma(za), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            q = g / za
        small = za < z_floor
        if small.any():
            q = np.where(small, np.clip(q, -K_CAP, K_CAP), q)
        z_new = za + q * h + dwz
        hit = z_new <= 0.0
        hit_idx = alive[hit]
        if hit_idx.size:
            den = za[hit] - z_new[hit]
            u = np.where(den > 0.0, za[hit] / den, 1.0)
            tau[hit_idx] = step * h + np.clip(u, 0.0, 1.0) * h
            censored[hit_idx] = False
        live = ~hit
        z[alive[live]] = z_new[live]
        alive = alive[live]
    return tau, censored


def simulate_comparison_Z(gamma, r0, h, t_max, rng, replicate=0):
    """One path of the comparison SDE; returns (hitting time, censored).

    Z starts at r0, drifts by Gamma(Z)/Z (capped at |.| <= 1e6 below
    z_floor = 1e-8 r0) and diffuses with variance 4h per step, matching
    the separation process's clock.  Absorption at 0 is located by
    linear interpolation inside the step; censored means Z stayed
    positive to t_max.
    """
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    if not h > 0 or not t_max > 0:
        raise ValueError("h and t_max must be positive")
    noise = as_noise(rng)
    tau, cens = _z_engine(gamma, r0, [replicate], h, t_max, noise)
    return float(tau[0]), bool(cens[0])


def run_comparison_Z_replicates(gamma, r0, n_replicates, *, h, t_max, rng,
                                threads=None, replicate_start=0):
    """(times, censored) arrays for independent Z paths, replicate-ordered."""
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    if not h > 0 or not t_max > 0:
        raise ValueError("h and t_max must be positive")
    if n_replicates < 1:
        raise ValueError("need at least one replicate")
    if int(math.ceil(t_max / h - 1e-9)) >= MAX_STEPS:
        raise ValueError("t_max/h exceeds the stream's step range")
    noise = as_noise(rng)
    indices = np.arange(replicate_start, replicate_start + int(n_replicates))
    workers = max(1, int(threads)) if threads else 1
    if workers == 1 or n_replicates == 1:
        return _z_engine(gamma, r0, indices, h, t_max, noise)
    chunks = np.array_split(indices, min(workers, int(n_replicates)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(
            lambda c: _z_engine(gamma, r0, c, h, t_max, noise), chunks))
    times = np.concatenate([p[0] for p in parts])
    cens = np.concatenate([p[1] for p in parts])
    return times, cens
