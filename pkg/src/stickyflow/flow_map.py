# -*- coding: utf-8 -*-
"""Lagrangian flow map of a sticky particle system.

The flow map sends an initial position to the trajectory position at time t.
On the atoms of the initial measure it is exact; elsewhere it is the
inf-extension ``min_i { X(x_i, t) + L(t) |y - x_i| }``, whose slope bound
L(t) is the largest adjacent-atom expansion ratio (capped by
``1 + t * max|v0'|`` against float noise).  Transition maps between two
positive times carry the Lipschitz constant t/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import TrajectorySet, eps_time
from .errors import AmbiguousTimeError, DomainError, InvalidPartitionError, TimeRangeError
from .measures import DiscreteMeasure, PiecewiseLinearFn


def interpolate_initial_velocity(traj: TrajectorySet) -> PiecewiseLinearFn:
    """Piecewise-linear interpolation of the initial velocities at the initial
    positions; the canonical absolutely continuous velocity profile of a
    discrete instance."""
    x = traj.init.positions
    v = traj.init.velocities
    if x.size >= 2:
        return PiecewiseLinearFn(x, v)
    x0, v0 = float(x[0]), float(v[0])
    return PiecewiseLinearFn([x0, x0 + 1.0], [v0, v0])


class FlowMap:
    """Evaluation of the trajectory map on and off the initial atoms."""

    __slots__ = ("traj", "v0", "atoms", "masses")

    def __init__(self, traj: TrajectorySet, v0: PiecewiseLinearFn | None = None):
        self.traj = traj
        self.v0 = v0 if v0 is not None else interpolate_initial_velocity(traj)
        self.atoms = traj.init.positions
        self.masses = traj.init.masses

    @property
    def initial_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.atoms, self.masses)

    def lipschitz_bound(self, t: float) -> float:
        """Extension slope L(t): largest adjacent expansion ratio, capped by
        ``1 + t * max|v0'|``."""
        cap = 1.0 + float(t) * self.v0.max_abs_slope
        if self.atoms.size < 2:
            return cap
        pos, _, _ = self.traj.state_at(t)
        ratio = float(np.max(np.diff(pos) / np.diff(self.atoms)))
        return min(max(ratio, 0.0), cap)

    def eval(self, y, t: float):
        """Flow map value(s) at time t; exact on atoms, inf-extension off them."""
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        pos, _, _ = self.traj.state_at(t)
        idx = np.searchsorted(self.atoms, y_arr)
        out = np.empty(y_arr.size)
        exact = np.zeros(y_arr.size, dtype=bool)
        hit = idx < self.atoms.size
        exact[hit] = self.atoms[idx[hit]] == y_arr[hit]
        out[exact] = pos[idx[exact]]
        rest = ~exact
        if np.any(rest):
            lip = self.lipschitz_bound(t)
            cones = pos[None, :] + lip * np.abs(y_arr[rest, None] - self.atoms[None, :])
            out[rest] = cones.min(axis=1)
        return float(out[0]) if np.asarray(y).ndim == 0 else out

    def transition(self, s: float, t: float) -> "TransitionFn":
        """Map from time-s positions to time-t positions, Lipschitz with
        constant t/s (verified over all cluster-position pairs)."""
        if s <= 0.0:
            raise DomainError("transition needs s > 0 (the slope bound t/s degenerates)")
        if t < s:
            raise TimeRangeError("need s <= t")
        self.traj._check_time(t)
        pos_s, _, cid_s = self.traj.state_at(s)
        pos_t, _, _ = self.traj.state_at(t)
        _, first = np.unique(cid_s, return_index=True)
        xs = pos_s[np.sort(first)]
        xt = pos_t[np.sort(first)]
        lip = t / s
        if xs.size > 1:
            dx = np.abs(xs[None, :] - xs[:, None])
            dy = np.abs(xt[None, :] - xt[:, None])
            slack = np.max(dy - lip * dx)
            if slack > 1e-12 * (1.0 + np.max(np.abs(xt))):
                raise AssertionError(f"transition ratio bound violated by {slack:g}")
        return TransitionFn(s=s, t=t, inputs=xs, outputs=xt)


@dataclass(frozen=True)
class TransitionFn:
    """Transport of time-s cluster positions to time t; exact on the sampled
    positions, inf-extension with slope t/s elsewhere."""

    s: float
    t: float
    inputs: np.ndarray
    outputs: np.ndarray

    @property
    def lipschitz(self) -> float:
        return self.t / self.s

    def __call__(self, x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.searchsorted(self.inputs, x_arr)
        out = np.empty(x_arr.size)
        exact = np.zeros(x_arr.size, dtype=bool)
        hit = idx < self.inputs.size
        exact[hit] = self.inputs[idx[hit]] == x_arr[hit]
        out[exact] = self.outputs[idx[exact]]
        rest = ~exact
        if np.any(rest):
            cones = self.outputs[None, :] + self.lipschitz * np.abs(x_arr[rest, None] - self.inputs[None, :])
            out[rest] = cones.min(axis=1)
        return float(out[0]) if np.asarray(x).ndim == 0 else out


def conditional_expectation(measure: DiscreteMeasure, values, grouping) -> np.ndarray:
    """Mass-weighted group means, broadcast back to atoms.

    ``grouping`` must partition the atom indices; each output entry is the
    weighted mean of ``values`` over its atom's group, which realizes the
    projection property of conditional expectation exactly on indicator test
    functions of the groups.
    """
    values = np.asarray(values, dtype=float)
    n = len(measure)
    if values.shape != (n,):
        raise InvalidPartitionError("values must be indexed like the atoms")
    seen = np.concatenate([np.asarray(g, dtype=np.int64).ravel() for g in grouping]) if grouping else np.array([], dtype=np.int64)
    if seen.size != n or not np.array_equal(np.sort(seen), np.arange(n)):
        raise InvalidPartitionError("grouping must partition the atom indices exactly")
    out = np.empty(n)
    m = measure.masses
    for g in grouping:
        g = np.asarray(g, dtype=np.int64).ravel()
        out[g] = np.dot(m[g], values[g]) / np.sum(m[g])
    return out


def flow_equation_residual(flow: FlowMap, t: float) -> float:
    """Max atomwise gap between the trajectory right-velocity and the
    cluster-grouped conditional expectation of the initial velocity.

    Zero in exact arithmetic for every non-event time; the float residual is
    returned.  Event times (within ``eps_time``) are rejected as ambiguous.
    """
    traj = flow.traj
    t = traj._check_time(t)
    times = traj.merge_times
    if times.size and float(np.min(np.abs(times - t))) <= eps_time(t):
        raise AmbiguousTimeError(f"t={t!r} coincides with a merge event")
    _, vel, _ = traj.state_at(t)
    groups = traj.partition_at(t)
    ce = conditional_expectation(flow.initial_measure, traj.init.velocities, groups)
    return float(np.max(np.abs(vel - ce)))


def continuity_modulus(v0: PiecewiseLinearFn, r: float) -> float:
    """Sliding-window supremum of the velocity variation over windows of
    width <= r.

    Variation is measured inside the knot hull (the extrapolation tails carry
    none), so for monotone profiles the modulus saturates at the total rise.
    Nondecreasing and subadditive in r.
    """
    r = float(r)
    if r < 0.0 or math.isnan(r):
        raise ValueError("window width must be >= 0")
    if r == 0.0:
        return 0.0
    knots = v0.x
    cum = v0.cumulative_variation

    def gvar(pts):
        return np.interp(pts, knots, cum)

    starts = np.unique(np.concatenate([knots, knots - r]))
    return float(np.max(gvar(starts + r) - gvar(starts)))


def sample_nonevent_times(traj: TrajectorySet, count: int, seed: int = 0,
                          include_zero: bool = False) -> np.ndarray:
    """Uniform sample times nudged off the merge events (and off t=0 unless
    requested), matching the a.e.-time scope of the flow equation."""
    if not math.isfinite(traj.t_end) or traj.t_end <= 0.0:
        raise TimeRangeError("need a finite positive t_end to sample times")
    rng = np.random.default_rng(seed)
    events = traj.merge_times
    out = np.empty(count)
    for k, u in enumerate(rng.uniform(0.0, traj.t_end, count)):
        t = float(u)
        for _ in range(10_000):
            near_event = events.size and float(np.min(np.abs(events - t))) <= eps_time(t)
            too_low = (not include_zero) and t <= eps_time(0.0)
            if not (near_event or too_low):
                break
            t += 3.0 * eps_time(t)
            if t > traj.t_end:
                t = 0.5 * traj.t_end
        out[k] = t
    return out
