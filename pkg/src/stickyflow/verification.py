# -*- coding: utf-8 -*-
"""Property checkers for the trajectory estimates plus a brute-force oracle.

Every checker is deterministic given its seed and returns a
:class:`VerificationReport` whose pass flag is exactly
``worst_residual <= tolerance``.  The time-stepping oracle is deliberately
naive (fixed steps, merge on ordering inversion) so it shares no code path
with the event-driven simulator it cross-validates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ParticleInit, TrajectorySet, simulate
from .errors import InvalidInputError
from .flow_map import FlowMap, flow_equation_residual, sample_nonevent_times
from .measures import PiecewiseLinearFn
from .weak_solution import WeakSolutionView, random_bumps

DEFAULT_TOL = 1e-10
ALL_PAIRS_LIMIT = 200  # beyond this many particles, sample random pairs
PAIR_SAMPLE = 10_000


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one property check over one or more instances."""

    check: str
    instances: int
    worst_residual: float
    worst_witness: dict = field(default_factory=dict)
    tolerance: float = DEFAULT_TOL

    @property
    def passed(self) -> bool:
        return self.worst_residual <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "instances": self.instances,
            "worst_residual": self.worst_residual,
            "witness": self.worst_witness,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def combine_reports(reports: list[VerificationReport]) -> VerificationReport:
    """Deterministic max-residual reduction of per-instance reports."""
    if not reports:
        raise ValueError("no reports to combine")
    worst = max(reports, key=lambda r: r.worst_residual)
    return VerificationReport(
        check=worst.check,
        instances=sum(r.instances for r in reports),
        worst_residual=worst.worst_residual,
        worst_witness=worst.worst_witness,
        tolerance=worst.tolerance,
    )


def random_instance(seed: int, n: int, x_span: float = 1.0, v_span: float = 1.0) -> ParticleInit:
    """Seeded uniform instance: sorted distinct positions in [0, x_span],
    normalized masses, velocities in [-v_span, v_span]."""
    rng = np.random.default_rng(seed)
    while True:
        x = np.sort(rng.uniform(0.0, x_span, n))
        if n == 1 or np.all(np.diff(x) > 0.0):
            break
    m = rng.uniform(0.5, 1.5, n)
    m /= m.sum()
    v = rng.uniform(-v_span, v_span, n)
    return ParticleInit(m, x, v)


def _sample_times(traj: TrajectorySet, count: int, seed: int, positive: bool) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo = 1e-9 * traj.t_end if positive else 0.0
    return np.sort(rng.uniform(lo, traj.t_end, count))


def _pair_indices(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if n <= ALL_PAIRS_LIMIT:
        i, j = np.triu_indices(n, k=1)
        return i, j
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n - 1, PAIR_SAMPLE)
    j = rng.integers(1, n, PAIR_SAMPLE)
    swap = i >= j
    i[swap], j[swap] = j[swap] - 1, i[swap] + 1
    return i, j


# ---------------------------------------------------------------------------
# trajectory estimates


def check_qspp(traj: TrajectorySet, samples: int = 50, seed: int = 0,
               tol: float = DEFAULT_TOL) -> VerificationReport:
    """Scaled gaps |gamma_i(t) - gamma_j(t)| / t never increase in t."""
    n = traj.n_particles
    if traj.t_end <= 0.0:
        raise InvalidInputError("qspp check needs t_end > 0")
    if n < 2:
        return VerificationReport("qspp", 1, 0.0, {}, tol)
    times = _sample_times(traj, samples, seed, positive=True)
    i, j = _pair_indices(n, seed)
    worst = -math.inf
    witness: dict = {}
    prev = None
    prev_t = None
    for t in times:
        pos, _, _ = traj.state_at(t)
        ratio = (pos[j] - pos[i]) / t
        if prev is not None:
            diff = ratio - prev
            k = int(np.argmax(diff))
            if diff[k] > worst:
                worst = float(diff[k])
                witness = {"i": int(i[k]), "j": int(j[k]), "s": float(prev_t), "t": float(t)}
        prev, prev_t = ratio, t
    if prev is None or times.size < 2:
        worst = 0.0
    return VerificationReport("qspp", 1, worst, witness, tol)


def _initial_velocity_prefix_tv(traj: TrajectorySet) -> np.ndarray:
    v = traj.init.velocities
    return np.concatenate([[0.0], np.cumsum(np.abs(np.diff(v)))])


def check_gap_bound(traj: TrajectorySet, v0: PiecewiseLinearFn | None = None,
                    samples: int = 50, seed: int = 0,
                    tol: float = DEFAULT_TOL) -> VerificationReport:
    """Gap bound with the summed velocity jumps over intermediate atoms:
    ``0 <= gap(t) <= gap(0) + t * sum |v_{k+1} - v_k|``."""
    if v0 is not None:
        err = np.max(np.abs(v0(traj.init.positions) - traj.init.velocities))
        if err > 1e-9 * (1.0 + np.max(np.abs(traj.init.velocities))):
            raise InvalidInputError("v0 does not interpolate the initial velocities")
    n = traj.n_particles
    if n < 2:
        return VerificationReport("gap-bound", 1, 0.0, {}, tol)
    x0 = traj.init.positions
    pref = _initial_velocity_prefix_tv(traj)
    i, j = _pair_indices(n, seed)
    gap0 = x0[j] - x0[i]
    jump = pref[j] - pref[i]
    times = _sample_times(traj, samples, seed, positive=False)
    worst = -math.inf
    witness: dict = {}
    for t in times:
        pos, _, _ = traj.state_at(t)
        gap = pos[j] - pos[i]
        resid = np.maximum(gap - (gap0 + t * jump), -gap)  # upper bound and order
        k = int(np.argmax(resid))
        if resid[k] > worst:
            worst = float(resid[k])
            witness = {"i": int(i[k]), "j": int(j[k]), "t": float(t)}
    return VerificationReport("gap-bound", 1, worst, witness, tol)


def check_two_point_gap_bound(traj: TrajectorySet, samples: int = 50, seed: int = 0,
                              tol: float = DEFAULT_TOL) -> VerificationReport:
    """Endpoint-only gap bound ``gap(t) <= gap(0) + t |v_j - v_i|``.

    Valid when the initial velocities are nondecreasing; with a faster outer
    particle chasing over a slow middle one it fails, and this checker is the
    instrument that detects the failure.
    """
    n = traj.n_particles
    if n < 2:
        return VerificationReport("gap-bound-two-point", 1, 0.0, {}, tol)
    x0 = traj.init.positions
    v = traj.init.velocities
    i, j = _pair_indices(n, seed)
    gap0 = x0[j] - x0[i]
    jump = np.abs(v[j] - v[i])
    times = _sample_times(traj, samples, seed, positive=False)
    worst = -math.inf
    witness: dict = {}
    for t in times:
        pos, _, _ = traj.state_at(t)
        resid = (pos[j] - pos[i]) - (gap0 + t * jump)
        k = int(np.argmax(resid))
        if resid[k] > worst:
            worst = float(resid[k])
            witness = {"i": int(i[k]), "j": int(j[k]), "t": float(t)}
    return VerificationReport("gap-bound-two-point", 1, worst, witness, tol)


def check_gap_concavity(traj: TrajectorySet, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Adjacent gaps have nonincreasing slopes across events and stay below
    their tangent at 0 until the merge.

    Both sides are piecewise linear in t, so checking at the event times (and
    the endpoints) covers all times.
    """
    n = traj.n_particles
    if n < 2:
        return VerificationReport("gap-concavity", 1, 0.0, {}, tol)
    times = np.unique(np.concatenate([[0.0, traj.t_end], traj.merge_times]))
    times = times[times <= traj.t_end]
    pos = np.empty((times.size, n))
    vel = np.empty((times.size, n))
    cid = np.empty((times.size, n), dtype=np.int64)
    for k, t in enumerate(times):
        pos[k], vel[k], cid[k] = traj.state_at(float(t))
    gaps = pos[:, 1:] - pos[:, :-1]
    slopes = vel[:, 1:] - vel[:, :-1]
    merged = cid[:, 1:] == cid[:, :-1]
    # row index of the merge per pair (times.size when the pair never merges)
    first = np.where(merged.any(axis=0), merged.argmax(axis=0), times.size)

    rows = np.arange(times.size)[:, None]
    worst = -math.inf
    witness: dict = {}
    slope_jump = slopes[1:] - slopes[:-1]
    pre_merge = rows[1:] < first[None, :]
    if np.any(pre_merge):
        jump = np.where(pre_merge, slope_jump, -math.inf)
        k, p = np.unravel_index(np.argmax(jump), jump.shape)
        if jump[k, p] > worst:
            worst = float(jump[k, p])
            witness = {"pair": int(p), "t": float(times[k + 1]), "kind": "slope"}

    tangent = gaps[0][None, :] + times[:, None] * slopes[0][None, :]
    resid = np.where(rows <= first[None, :], gaps - tangent, -math.inf)
    k, p = np.unravel_index(np.argmax(resid), resid.shape)
    if resid[k, p] > worst:
        worst = float(resid[k, p])
        witness = {"pair": int(p), "t": float(times[k]), "kind": "tangent"}
    return VerificationReport("gap-concavity", 1, worst, witness, tol)


_G_FAMILY = (
    ("1", lambda x: np.ones_like(x)),
    ("id", lambda x: x),
    ("x^2", lambda x: x * x),
    ("cos", np.cos),
)


def check_averaging(traj: TrajectorySet, g_family=_G_FAMILY, samples: int = 50,
                    seed: int = 0, tol: float = DEFAULT_TOL) -> VerificationReport:
    """``sum m g(gamma(t)) dgamma(t+)`` is unchanged when the velocities are
    taken at any earlier time s."""
    times = np.concatenate([[0.0], _sample_times(traj, samples, seed, positive=True), [traj.t_end]])
    times = np.unique(times)
    m = traj.init.masses
    pos = []
    vel = []
    for t in times:
        p, v, _ = traj.state_at(t)
        pos.append(p)
        vel.append(v)
    vel = np.asarray(vel)
    worst = -math.inf
    witness: dict = {}
    for name, g in g_family:
        for kt in range(1, len(times)):
            w = m * g(pos[kt])
            lhs = float(np.dot(w, vel[kt]))
            rhs = vel[:kt] @ w
            diff = np.abs(rhs - lhs)
            ks = int(np.argmax(diff))
            if diff[ks] > worst:
                worst = float(diff[ks])
                witness = {"g": name, "s": float(times[ks]), "t": float(times[kt])}
    return VerificationReport("averaging", 1, worst, witness, tol)


def check_flow_equation(traj: TrajectorySet, times: int = 20, seed: int = 0,
                        tol: float = 1e-12) -> VerificationReport:
    """Right velocity equals the cluster-conditioned mean initial velocity at
    sampled non-event times."""
    flow = FlowMap(traj)
    ts = sample_nonevent_times(traj, times, seed)
    worst = -math.inf
    witness: dict = {}
    for t in ts:
        r = flow_equation_residual(flow, float(t))
        if r > worst:
            worst, witness = r, {"t": float(t)}
    return VerificationReport("flow-equation", 1, worst, witness, tol)


def check_energy(traj: TrajectorySet, samples: int = 50, seed: int = 0,
                 tol: float = 1e-12) -> VerificationReport:
    """Kinetic energy is nonincreasing along sampled times and event times."""
    times = np.unique(np.concatenate([
        [0.0, traj.t_end], _sample_times(traj, samples, seed, positive=False), traj.merge_times,
    ]))
    ke = np.asarray([traj.kinetic_energy(t) for t in times])
    inc = np.diff(ke)
    worst = float(np.max(inc)) if inc.size else 0.0
    k = int(np.argmax(inc)) if inc.size else 0
    witness = {"s": float(times[k]), "t": float(times[k + 1])} if inc.size else {}
    return VerificationReport("energy", 1, worst, witness, tol)


def check_momentum(traj: TrajectorySet, samples: int = 50, seed: int = 0) -> VerificationReport:
    """Total momentum drift at sampled times, tolerance 1e-12 (1 + |p0|)."""
    p0 = traj.total_momentum(0.0)
    times = np.concatenate([_sample_times(traj, samples, seed, positive=False), [traj.t_end]])
    drift = np.asarray([abs(traj.total_momentum(t) - p0) for t in times])
    k = int(np.argmax(drift))
    return VerificationReport("momentum", 1, float(drift[k]), {"t": float(times[k]), "p0": p0},
                              1e-12 * (1.0 + abs(p0)))


def check_order_stickiness(traj: TrajectorySet, samples: int = 100, seed: int = 0,
                           tol: float = 1e-12) -> VerificationReport:
    """Particle order is preserved and merged pairs never separate, checked
    at every event time and at random times."""
    times = np.unique(np.concatenate([
        [0.0, traj.t_end], traj.merge_times, _sample_times(traj, samples, seed, positive=False),
    ]))
    worst = -math.inf
    witness: dict = {}
    merged_pairs: set = set()
    scale = 1.0 + float(np.max(np.abs(traj.init.positions)))
    for t in times:
        pos, _, cid = traj.state_at(t)
        inv = np.diff(pos)
        if inv.size:
            k = int(np.argmin(inv))
            r = float(-inv[k]) / scale
            if r > worst:
                worst, witness = r, {"t": float(t), "i": k, "kind": "order"}
        same = cid[:-1] == cid[1:]
        for k in np.flatnonzero(same):
            merged_pairs.add(int(k))
        for k in merged_pairs:
            if cid[k] != cid[k + 1]:
                return VerificationReport("order-stickiness", 1, math.inf,
                                          {"t": float(t), "i": k, "kind": "stickiness"}, tol)
    if worst == -math.inf:
        worst = 0.0
    return VerificationReport("order-stickiness", 1, worst, witness, tol)


def check_oleinik(traj: TrajectorySet, samples: int = 20, seed: int = 0,
                  tol: float = DEFAULT_TOL) -> VerificationReport:
    """One-sided entropy bound at sampled positive times."""
    view = WeakSolutionView(traj)
    times = _sample_times(traj, samples, seed, positive=True)
    worst = -math.inf
    witness: dict = {}
    for t in times:
        r = view.oleinik_residual(float(t))
        if r > worst:
            worst, witness = r, {"t": float(t)}
    return VerificationReport("oleinik", 1, worst, witness, tol)


def check_weak_form(traj: TrajectorySet, which: str, bumps: int = 10, seed: int = 0,
                    order: int = 12, tol: float = 1e-8) -> VerificationReport:
    """Weak-form residual over random bump test functions."""
    view = WeakSolutionView(traj)
    x_lo, x_hi = _position_bounds(traj)
    span = max(x_hi - x_lo, 1.0)
    family = random_bumps(bumps, x_lo - 0.25 * span, x_hi + 0.25 * span, traj.t_end, seed)
    worst = -math.inf
    witness: dict = {}
    for k, phi in enumerate(family):
        r = view.weak_form_residual(phi, which=which, order=order)
        if r > worst:
            worst = r
            witness = {"bump": k, "center": phi.center, "radius": phi.radius,
                       "t_lo": phi.t_lo, "t_hi": phi.t_hi}
    return VerificationReport(f"weak-{which}", 1, worst, witness, tol)


def _position_bounds(traj: TrajectorySet) -> tuple[float, float]:
    # trajectory extremes sit at segment endpoints, i.e. at event times or 0/t_end
    times = np.unique(np.concatenate([[0.0, traj.t_end], traj.merge_times]))
    lo, hi = math.inf, -math.inf
    for t in times:
        pos, _, _ = traj.state_at(float(t))
        lo = min(lo, float(pos[0]))
        hi = max(hi, float(pos[-1]))
    return lo, hi


# ---------------------------------------------------------------------------
# brute-force oracle


@dataclass(frozen=True)
class OracleTrajectory:
    """Sampled paths from the fixed-step oracle."""

    times: np.ndarray
    positions: np.ndarray  # shape (len(times), n_particles)

    def position_at(self, i: int, t: float) -> float:
        k = int(np.clip(np.searchsorted(self.times, t), 0, self.times.size - 1))
        return float(self.positions[k, i])


def oracle_simulate(init: ParticleInit, t_end: float, dt: float) -> OracleTrajectory:
    """Explicit time stepping: advance clusters by dt, merge any group whose
    ordering inverts (or coincides), conserving mass and momentum; the merged
    cluster sits at the plain midpoint of the offending positions.

    First-order accurate: merge detection lags a collision by at most one
    step and the midpoint placement is O(dt) off the true meeting point, so
    the error scales with dt (a mass-weighted placement would be exact to
    float noise and useless as a refinement check).  The step is trimmed so
    the grid ends exactly at t_end.
    """
    if not dt > 0.0:
        raise InvalidInputError("dt must be positive")
    if not (math.isfinite(t_end) and t_end >= 0.0):
        raise InvalidInputError("t_end must be finite and >= 0")
    steps = max(int(round(t_end / dt)), 1) if t_end > 0.0 else 0
    h = t_end / steps if steps else 0.0
    n = len(init)
    pos = init.positions.astype(float).copy()
    vel = init.velocities.astype(float).copy()
    mass = init.masses.astype(float).copy()
    counts = np.ones(n, dtype=np.int64)

    out = np.empty((steps + 1, n))
    out[0] = np.repeat(pos, counts)
    for k in range(1, steps + 1):
        pos = pos + vel * h
        # merge maximal runs of inverted / coincident neighbours, then re-check
        while pos.size > 1:
            bad = np.flatnonzero(np.diff(pos) <= 0.0)
            if bad.size == 0:
                break
            keep_start = np.ones(pos.size, dtype=bool)
            keep_start[bad + 1] = False
            starts = np.flatnonzero(keep_start)
            group_sizes = np.diff(np.concatenate([starts, [pos.size]]))
            new_mass = np.add.reduceat(mass, starts)
            new_pos = np.add.reduceat(pos, starts) / group_sizes
            new_vel = np.add.reduceat(mass * vel, starts) / new_mass
            new_counts = np.add.reduceat(counts, starts)
            pos, vel, mass, counts = new_pos, new_vel, new_mass, new_counts
        out[k] = np.repeat(pos, counts)
    times = np.linspace(0.0, t_end, steps + 1)
    return OracleTrajectory(times=times, positions=out)


def compare_oracle(init: ParticleInit, t_end: float, dt: float, tol: float = 1e-3) -> VerificationReport:
    """Sup-norm gap between event-driven and time-stepped positions over the
    oracle's whole time grid."""
    oracle = oracle_simulate(init, t_end, dt)
    traj = simulate(init, t_end)
    worst = -math.inf
    witness: dict = {}
    for i in range(len(init)):
        ts, xs = traj.breakpoints(i)
        exact = np.interp(oracle.times, ts, xs)
        err = np.abs(exact - oracle.positions[:, i])
        k = int(np.argmax(err))
        if err[k] > worst:
            worst = float(err[k])
            witness = {"particle": i, "t": float(oracle.times[k]), "dt": dt}
    return VerificationReport("oracle", 1, worst, witness, tol)
