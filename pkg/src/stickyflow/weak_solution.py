# -*- coding: utf-8 -*-
"""Eulerian view of a trajectory set and the weak-form residuals.

The transported measure at time t is the push-forward of the initial atoms,
i.e. the cluster positions weighted by cluster masses; the velocity field
equals the cluster right-velocity on those positions and 0 elsewhere.  The
mass and momentum identities are tested against smooth compactly supported
space-time bumps; space integrals are exact atom sums while the time integral
uses composite Gauss-Legendre panels per inter-event segment (the integrand
is smooth there since trajectories are linear between events).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dynamics import TrajectorySet, eps_position
from .errors import DomainError, TimeRangeError
from .measures import DiscreteMeasure

# panels per smooth time segment; with 12-point Gauss-Legendre this puts the
# residual floor around 1e-9 on desk-scale fixtures while leaving room for
# the refinement check (doubling the order still shrinks it by >> 10x)
QUAD_PANELS = 10


def _bump(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    m = np.abs(u) < 1.0
    w = 1.0 - u[m] ** 2
    out[m] = np.exp(1.0 - 1.0 / w)
    return out


def _dbump(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    m = np.abs(u) < 1.0
    w = 1.0 - u[m] ** 2
    out[m] = np.exp(1.0 - 1.0 / w) * (-2.0 * u[m] / (w * w))
    return out


@dataclass(frozen=True)
class SpaceTimeBump:
    """Smooth compactly supported test function
    ``phi(x, t) = B((x - center)/radius) * B((2t - t_lo - t_hi)/(t_hi - t_lo))``
    with ``B(u) = exp(1 - 1/(1 - u^2))`` on ``|u| < 1`` and 0 beyond.

    ``t_lo < 0`` makes ``phi(., 0)`` nonzero so the initial-condition term of
    the weak form is actually exercised.  Partial derivatives are analytic.
    """

    center: float
    radius: float
    t_lo: float
    t_hi: float

    def __post_init__(self):
        if not (self.radius > 0.0 and self.t_lo < self.t_hi):
            raise ValueError("need radius > 0 and t_lo < t_hi")

    def _ux(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.radius

    def _ut(self, t):
        mid = 0.5 * (self.t_lo + self.t_hi)
        half = 0.5 * (self.t_hi - self.t_lo)
        return (np.asarray(t, dtype=float) - mid) / half

    def value(self, x, t):
        return _bump(self._ux(x)) * _bump(self._ut(t))

    def dx(self, x, t):
        return _dbump(self._ux(x)) / self.radius * _bump(self._ut(t))

    def dt(self, x, t):
        half = 0.5 * (self.t_hi - self.t_lo)
        return _bump(self._ux(x)) * _dbump(self._ut(t)) / half

    @property
    def space_support(self) -> tuple[float, float]:
        return self.center - self.radius, self.center + self.radius


def random_bumps(count: int, x_lo: float, x_hi: float, t_hi: float, seed: int = 0,
                 t_lo_range: tuple[float, float] = (-1.5, -0.5)) -> list[SpaceTimeBump]:
    """Random test functions supported inside [x_lo, x_hi] x (t_lo, t_hi],
    with substantial radii so the residuals stay well above float noise."""
    rng = np.random.default_rng(seed)
    width = x_hi - x_lo
    out = []
    for _ in range(count):
        r = rng.uniform(0.25 * width, 0.5 * width)
        c = rng.uniform(x_lo + r, x_hi - r)
        hi = rng.uniform(0.65 * t_hi, t_hi)
        lo = rng.uniform(*t_lo_range)
        out.append(SpaceTimeBump(center=float(c), radius=float(r), t_lo=float(lo), t_hi=float(hi)))
    return out


@lru_cache(maxsize=16)
def _gauss(order: int):
    return np.polynomial.legendre.leggauss(order)


class WeakSolutionView:
    """The pair (transported measure, velocity field) induced by trajectories."""

    __slots__ = ("traj",)

    def __init__(self, traj: TrajectorySet):
        self.traj = traj

    def measure_at(self, t: float) -> DiscreteMeasure:
        """Push-forward of the initial measure: atoms at the distinct cluster
        positions, masses summed over members."""
        act = self.traj.active_nodes(t)
        pos = self.traj._bx[act] + self.traj._vel[act] * (t - self.traj._birth[act])
        return DiscreteMeasure(pos, self.traj._mass[act])

    def velocity_field_at(self, t: float, x: float) -> float:
        """Cluster right-velocity when x is a cluster position (within the
        position tolerance), 0 off the support."""
        act = self.traj.active_nodes(t)
        pos = self.traj._bx[act] + self.traj._vel[act] * (t - self.traj._birth[act])
        idx = np.searchsorted(pos, x)
        for j in (idx - 1, idx):
            if 0 <= j < pos.size and abs(float(pos[j]) - x) <= eps_position(x):
                return float(self.traj._vel[act[j]])
        return 0.0

    def energy_profile(self, times) -> np.ndarray:
        """Kinetic energy ``sum 0.5 m v^2`` of the field at each time."""
        return np.asarray([self.traj.kinetic_energy(t) for t in np.asarray(times, dtype=float)])

    def weak_form_residual(self, phi: SpaceTimeBump, which: str = "mass",
                           order: int = 12, panels: int = QUAD_PANELS) -> float:
        """|space-time integral + initial term| of the chosen conservation law.

        mass:      int (dphi/dt + v dphi/dx) drho_t dt + int phi(.,0) drho_0
        momentum:  int v (dphi/dt + v dphi/dx) drho_t dt + int phi(.,0) v_0 drho_0

        Exact in exact arithmetic; what remains is the Gauss-Legendre error of
        the smooth bump on each inter-event panel, which vanishes as the order
        or panel count grows.
        """
        if which not in ("mass", "momentum"):
            raise ValueError(f"which must be 'mass' or 'momentum', got {which!r}")
        traj = self.traj
        if phi.t_hi > traj.t_end:
            raise TimeRangeError("test function time support exceeds t_end")
        t_start = max(0.0, phi.t_lo)
        edges = [t_start]
        for tm in np.unique(traj.merge_times):
            if t_start < tm < phi.t_hi:
                edges.append(float(tm))
        edges.append(phi.t_hi)

        nodes, weights = _gauss(order)
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            if b <= a:
                continue
            act = traj.active_nodes(0.5 * (a + b))
            mass = traj._mass[act]
            vel = traj._vel[act]
            bx = traj._bx[act]
            birth = traj._birth[act]
            panel_edges = np.linspace(a, b, panels + 1)
            for pa, pb in zip(panel_edges[:-1], panel_edges[1:]):
                tt = 0.5 * (pb - pa) * nodes + 0.5 * (pa + pb)
                ww = 0.5 * (pb - pa) * weights
                xx = bx[:, None] + vel[:, None] * (tt[None, :] - birth[:, None])
                integrand = phi.dt(xx, tt[None, :]) + vel[:, None] * phi.dx(xx, tt[None, :])
                if which == "momentum":
                    integrand = vel[:, None] * integrand
                total += float(np.dot(mass, integrand @ ww))

        x0 = traj.init.positions
        w0 = traj.init.masses if which == "mass" else traj.init.masses * traj.init.velocities
        initial = float(np.dot(w0, phi.value(x0, np.zeros_like(x0))))
        return abs(total + initial)

    def oleinik_residual(self, t: float) -> float:
        """Largest one-sided entropy defect
        ``(v(x)-v(y))(x-y) - (x-y)^2/t`` over cluster position pairs;
        nonpositive in exact arithmetic.  Returns 0 with fewer than two
        clusters."""
        if not t > 0.0:
            raise DomainError("entropy condition needs t > 0")
        self.traj._check_time(t)
        act = self.traj.active_nodes(t)
        if act.size < 2:
            return 0.0
        pos = self.traj._bx[act] + self.traj._vel[act] * (t - self.traj._birth[act])
        vel = self.traj._vel[act]
        i, j = np.triu_indices(pos.size, k=1)
        dx = pos[j] - pos[i]
        dv = vel[j] - vel[i]
        return float(np.max(dv * dx - dx * dx / t))
