# -*- coding: utf-8 -*-
"""Exact event-driven sticky particle dynamics.

Clusters fly freely between events; when clusters meet they merge into one
cluster carrying the total mass and momentum.  Only adjacent clusters can
collide first in 1-D, so the scheduler keeps one candidate collision per
adjacent pair in a min-heap with lazy invalidation (an entry is dead as soon
as either endpoint cluster has merged).  Cost is O(N log N) for N particles,
at most N-1 merges.

Merging is processed pairwise: mass and momentum are additive, so chained
pairwise merges at one meeting point reproduce the k-way merge rule exactly.
The public event log coalesces such chains back into single k-way events.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, TimeRangeError

FORMAT_TAG = "sticky-flow/1"

# near-tie tolerances for event coalescing and event-time avoidance
EPS_T = 1e-12
EPS_X = 1e-12


def eps_time(t: float) -> float:
    return EPS_T * (1.0 + abs(t))


def eps_position(x: float) -> float:
    return EPS_X * (1.0 + abs(x))


class ParticleInit:
    """Initial data: masses, positions and velocities of N particles.

    Positions must be pairwise distinct; the three arrays are sorted together
    by position, and particle indices everywhere in the package refer to this
    position-sorted order.  Masses must be positive and sum to 1.
    """

    __slots__ = ("masses", "positions", "velocities")

    def __init__(self, masses, positions, velocities):
        m = np.atleast_1d(np.asarray(masses, dtype=float))
        x = np.atleast_1d(np.asarray(positions, dtype=float))
        v = np.atleast_1d(np.asarray(velocities, dtype=float))
        if not (m.ndim == x.ndim == v.ndim == 1) or not (m.size == x.size == v.size):
            raise InvalidInputError("masses, positions, velocities must be 1-D of equal length")
        if m.size == 0:
            raise InvalidInputError("need at least one particle")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise InvalidInputError("particle data must be finite")
        if np.any(m <= 0.0):
            raise InvalidInputError("masses must be positive")
        total = float(np.sum(m))
        if abs(total - 1.0) > 1e-12:
            raise InvalidInputError(f"masses must sum to 1 (got {total!r})")
        order = np.argsort(x, kind="stable")
        x = x[order]
        if np.any(np.diff(x) <= 0.0):
            raise InvalidInputError("duplicate initial positions")
        self.masses = m[order]
        self.positions = x
        self.velocities = v[order]
        for arr in (self.masses, self.positions, self.velocities):
            arr.flags.writeable = False

    def __len__(self):
        return self.masses.size

    @classmethod
    def from_dict(cls, obj: dict) -> "ParticleInit":
        """Parse ``{"particles": [[m, x, v], ...]}``; unknown keys rejected."""
        if not isinstance(obj, dict):
            raise InvalidInputError("particle input must be a JSON object")
        extra = set(obj) - {"particles", "format"}
        if extra:
            raise InvalidInputError(f"unknown keys in particle input: {sorted(extra)}")
        if "particles" not in obj:
            raise InvalidInputError("missing 'particles' key")
        rows = np.asarray(obj["particles"], dtype=float)
        if rows.size == 0:
            raise InvalidInputError("empty particle list")
        if rows.ndim != 2 or rows.shape[1] != 3:
            raise InvalidInputError("particles must be [mass, position, velocity] triples")
        return cls(rows[:, 0], rows[:, 1], rows[:, 2])

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "particles": [[float(m), float(x), float(v)]
                          for m, x, v in zip(self.masses, self.positions, self.velocities)],
        }


@dataclass(frozen=True)
class MergeEvent:
    """One (possibly k-way) merge: the clusters listed in ``merged`` met at
    ``(time, position)`` and left as the single cluster ``result``."""

    time: float
    position: float
    merged: tuple[int, ...]
    result: int


@dataclass(frozen=True)
class Cluster:
    """A maximal group of particles sharing one trajectory.

    ``members`` is a contiguous range of position-sorted particle indices;
    adjacency of merges keeps every cluster contiguous.
    """

    node: int
    members: range
    mass: float
    velocity: float
    born_at: float
    position_at_birth: float

    def position_at(self, t: float) -> float:
        return self.position_at_birth + self.velocity * (t - self.born_at)


def _run_events(m_arr, x_arr, v_arr, t_end):
    """Hot loop: pairwise merges in nondecreasing time order.

    Returns per-node genealogy arrays (leaves 0..n-1 first) and the raw merge
    records (t, x, left_id, right_id, new_id).
    """
    n = m_arr.size
    mass = m_arr.tolist()
    bx = x_arr.tolist()
    vel = v_arr.tolist()
    birth = [0.0] * n
    parent = [-1] * n
    lo = list(range(n))
    hi = list(range(1, n + 1))
    left = list(range(-1, n - 1))
    right = list(range(1, n + 1))
    right[-1] = -1
    alive = [True] * n
    merges = []

    heap = []
    if n > 1:
        dv = v_arr[:-1] - v_arr[1:]
        gap = x_arr[1:] - x_arr[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            te = np.where(dv > 0.0, gap / np.where(dv > 0.0, dv, 1.0), np.inf)
        ok = np.flatnonzero(np.isfinite(te) & (te <= t_end))
        xe = x_arr[ok] + v_arr[ok] * te[ok]
        heap = [(float(t), float(x), int(i), int(i + 1)) for t, x, i in zip(te[ok], xe, ok)]
        heapq.heapify(heap)

    push = heapq.heappush
    pop = heapq.heappop
    while heap:
        t, _xq, l, r = pop(heap)
        if not (alive[l] and alive[r]):
            continue
        u = len(mass)
        ml = mass[l]
        mr = mass[r]
        mu = ml + mr
        pl = bx[l] + vel[l] * (t - birth[l])
        pr = bx[r] + vel[r] * (t - birth[r])
        xm = (ml * pl + mr * pr) / mu
        vu = (ml * vel[l] + mr * vel[r]) / mu
        mass.append(mu)
        bx.append(xm)
        vel.append(vu)
        birth.append(t)
        parent.append(-1)
        lo.append(lo[l])
        hi.append(hi[r])
        alive[l] = False
        alive[r] = False
        alive.append(True)
        parent[l] = u
        parent[r] = u
        ll = left[l]
        rr = right[r]
        left.append(ll)
        right.append(rr)
        if ll >= 0:
            right[ll] = u
        if rr >= 0:
            left[rr] = u
        merges.append((t, xm, l, r, u))

        if ll >= 0:
            dvn = vel[ll] - vu
            if dvn > 0.0:
                gap = xm - (bx[ll] + vel[ll] * (t - birth[ll]))
                if gap < 0.0:
                    gap = 0.0  # float noise; fire immediately to keep order
                te = t + gap / dvn
                if te <= t_end and not math.isinf(te):
                    push(heap, (te, xm + vu * (te - t), ll, u))
        if rr >= 0:
            dvn = vu - vel[rr]
            if dvn > 0.0:
                gap = (bx[rr] + vel[rr] * (t - birth[rr])) - xm
                if gap < 0.0:
                    gap = 0.0
                te = t + gap / dvn
                if te <= t_end and not math.isinf(te):
                    push(heap, (te, xm + vu * (te - t), u, rr))

    return mass, bx, vel, birth, parent, lo, hi, merges


class TrajectorySet:
    """Sticky particle trajectories on [0, t_end] plus merge genealogy.

    Genealogy nodes 0..N-1 are the original particles; each merge appends a
    node.  A node is *active* at time t when it was born by t and its parent
    (if any) was not.  Per-particle evaluation walks the leaf-to-root chain.
    """

    __slots__ = ("init", "t_end", "_mass", "_bx", "_vel", "_birth", "_parent",
                 "_death", "_lo", "_hi", "_merges", "_events", "_merge_times")

    def __init__(self, init: ParticleInit, t_end: float, arrays):
        mass, bx, vel, birth, parent, lo, hi, merges = arrays
        self.init = init
        self.t_end = t_end
        self._mass = np.asarray(mass)
        self._bx = np.asarray(bx)
        self._vel = np.asarray(vel)
        self._birth = np.asarray(birth)
        self._parent = np.asarray(parent, dtype=np.int64)
        self._lo = np.asarray(lo, dtype=np.int64)
        self._hi = np.asarray(hi, dtype=np.int64)
        death = np.full(self._mass.size, np.inf)
        has_parent = self._parent >= 0
        death[has_parent] = self._birth[self._parent[has_parent]]
        self._death = death
        self._merges = merges
        self._events = None
        self._merge_times = np.asarray([m[0] for m in merges])

    # -- basic shape ---------------------------------------------------

    @property
    def n_particles(self) -> int:
        return len(self.init)

    @property
    def node_count(self) -> int:
        return self._mass.size

    @property
    def merge_times(self) -> np.ndarray:
        """Raw pairwise merge times, nondecreasing (may repeat within a
        k-way event)."""
        return self._merge_times

    @property
    def events(self) -> tuple[MergeEvent, ...]:
        """Coalesced event log: chained pairwise merges at one meeting point
        (times within eps_time, positions within eps_position) appear as a
        single k-way event."""
        if self._events is None:
            self._events = self._coalesce()
        return self._events

    def _coalesce(self) -> tuple[MergeEvent, ...]:
        groups: list[dict] = []
        for (t, x, l, r, u) in self._merges:
            attached = False
            for g in reversed(groups):
                if t - g["t"] > eps_time(t):
                    break
                if g["result"] in (l, r) and abs(x - g["x"]) <= eps_position(x):
                    g["members"].append(r if g["result"] == l else l)
                    g["result"] = u
                    attached = True
                    break
            if not attached:
                groups.append({"t": t, "x": x, "members": [l, r], "result": u})
        return tuple(
            MergeEvent(g["t"], g["x"], tuple(g["members"]), g["result"]) for g in groups
        )

    # -- time validation -----------------------------------------------

    def _check_time(self, t: float) -> float:
        t = float(t)
        if math.isnan(t) or t < 0.0 or t > self.t_end:
            raise TimeRangeError(f"time {t!r} outside [0, {self.t_end!r}]")
        return t

    # -- per-particle queries --------------------------------------------

    def _node_at(self, i: int, t: float, before: bool = False) -> int:
        parent = self._parent
        birth = self._birth
        node = i
        p = parent[node]
        if before:
            while p != -1 and birth[p] < t:
                node = p
                p = parent[node]
        else:
            while p != -1 and birth[p] <= t:
                node = p
                p = parent[node]
        return int(node)

    def position_at(self, i: int, t: float) -> float:
        t = self._check_time(t)
        node = self._node_at(i, t)
        return float(self._bx[node] + self._vel[node] * (t - self._birth[node]))

    def velocity_at(self, i: int, t: float, side: str = "right") -> float:
        t = self._check_time(t)
        if side == "right":
            return float(self._vel[self._node_at(i, t)])
        if side == "left":
            if t <= 0.0:
                raise TimeRangeError("left velocity needs t > 0")
            return float(self._vel[self._node_at(i, t, before=True)])
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")

    # -- cluster decomposition --------------------------------------------

    def active_nodes(self, t: float) -> np.ndarray:
        """Genealogy ids of the clusters alive at time t, in spatial order."""
        t = self._check_time(t)
        act = np.flatnonzero((self._birth <= t) & (t < self._death))
        return act[np.argsort(self._lo[act])]

    def state_at(self, t: float):
        """Positions, right velocities and cluster ids for every particle."""
        t = self._check_time(t)
        act = self.active_nodes(t)
        counts = self._hi[act] - self._lo[act]  # active ranges tile [0, N)
        p_act = self._bx[act] + self._vel[act] * (t - self._birth[act])
        pos = np.repeat(p_act, counts)
        vel = np.repeat(self._vel[act], counts)
        cid = np.repeat(act, counts)
        return pos, vel, cid

    def clusters_at(self, t: float) -> list[Cluster]:
        return [self.cluster(int(node)) for node in self.active_nodes(t)]

    def cluster(self, node: int) -> Cluster:
        return Cluster(
            node=node,
            members=range(int(self._lo[node]), int(self._hi[node])),
            mass=float(self._mass[node]),
            velocity=float(self._vel[node]),
            born_at=float(self._birth[node]),
            position_at_birth=float(self._bx[node]),
        )

    def partition_at(self, t: float) -> list[np.ndarray]:
        """Particle-index groups of the cluster decomposition at time t."""
        act = self.active_nodes(t)
        return [np.arange(self._lo[n], self._hi[n]) for n in act]

    def children(self, node: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.flatnonzero(self._parent == node))

    # -- conserved quantities ---------------------------------------------

    def total_momentum(self, t: float) -> float:
        t = self._check_time(t)
        act = (self._birth <= t) & (t < self._death)
        return float(np.dot(self._mass[act], self._vel[act]))

    def kinetic_energy(self, t: float) -> float:
        t = self._check_time(t)
        act = (self._birth <= t) & (t < self._death)
        return 0.5 * float(np.dot(self._mass[act], self._vel[act] ** 2))

    # -- piecewise-linear view ---------------------------------------------

    def breakpoints(self, i: int):
        """Knot times and positions of trajectory i on [0, t_end]."""
        if not math.isfinite(self.t_end):
            raise ValueError("breakpoints need a finite t_end")
        parent = self._parent
        birth = self._birth
        times = [0.0]
        nodes = [i]
        node = i
        p = parent[node]
        while p != -1 and birth[p] <= self.t_end:
            node = int(p)
            tb = float(birth[node])
            if tb == times[-1]:
                nodes[-1] = node  # zero-lifetime hop inside a k-way event
            else:
                times.append(tb)
                nodes.append(node)
            p = parent[node]
        if times[-1] < self.t_end:
            times.append(self.t_end)
            nodes.append(node)
        ts = np.asarray(times)
        xs = self._bx[nodes] + self._vel[nodes] * (ts - self._birth[nodes])
        return ts, xs

    def piecewise(self, i: int):
        from .measures import PiecewiseLinearFn

        ts, xs = self.breakpoints(i)
        if ts.size < 2:
            raise ValueError("trajectory with t_end = 0 has a single knot")
        return PiecewiseLinearFn(ts, xs)


def simulate(init: ParticleInit, t_end: float) -> TrajectorySet:
    """Run the event-driven dynamics up to ``t_end`` (``math.inf`` runs until
    no further collision is possible)."""
    t_end = float(t_end)
    if math.isnan(t_end) or t_end < 0.0:
        raise InvalidInputError(f"t_end must be >= 0, got {t_end!r}")
    arrays = _run_events(init.masses, init.positions, init.velocities, t_end)
    return TrajectorySet(init, t_end, arrays)


# ---------------------------------------------------------------------------
# serialization


def trajectory_to_dict(traj: TrajectorySet) -> dict:
    parts = []
    for i in range(traj.n_particles):
        ts, xs = traj.breakpoints(i)
        parts.append({
            "mass": float(traj.init.masses[i]),
            "breakpoints": [[float(t), float(x)] for t, x in zip(ts, xs)],
        })
    return {
        "format": FORMAT_TAG,
        "t_end": float(traj.t_end),
        "particles": parts,
        "events": [
            {"t": ev.time, "x": ev.position, "clusters": list(ev.merged), "result": ev.result}
            for ev in traj.events
        ],
    }


@dataclass(frozen=True)
class ImportedTrajectory:
    """Round-trip view of an exported trajectory file."""

    t_end: float
    masses: np.ndarray
    breakpoints: tuple[np.ndarray, ...]  # per particle, rows [t, x]
    events: tuple[MergeEvent, ...]


def trajectory_from_dict(obj: dict) -> ImportedTrajectory:
    extra = set(obj) - {"format", "t_end", "particles", "events"}
    if extra:
        raise InvalidInputError(f"unknown keys in trajectory file: {sorted(extra)}")
    if obj.get("format") != FORMAT_TAG:
        raise InvalidInputError(f"expected format {FORMAT_TAG!r}")
    parts = obj["particles"]
    masses = np.asarray([p["mass"] for p in parts], dtype=float)
    bps = tuple(np.asarray(p["breakpoints"], dtype=float) for p in parts)
    events = tuple(
        MergeEvent(float(e["t"]), float(e["x"]), tuple(int(c) for c in e["clusters"]), int(e["result"]))
        for e in obj.get("events", [])
    )
    return ImportedTrajectory(float(obj["t_end"]), masses, bps, events)


def trajectory_to_csv(traj: TrajectorySet, fh) -> None:
    """Write breakpoint rows (particle, t_break, x_break) for plotting."""
    writer = csv.writer(fh)
    writer.writerow(["particle", "t_break", "x_break"])
    for i in range(traj.n_particles):
        ts, xs = traj.breakpoints(i)
        for t, x in zip(ts, xs):
            writer.writerow([i, repr(float(t)), repr(float(x))])
