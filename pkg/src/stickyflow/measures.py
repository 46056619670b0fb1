# -*- coding: utf-8 -*-
"""Probability measures on the line and their discretization.

Atomic measures are the computational currency of the whole package: initial
data is reduced to finitely many weighted atoms, transported measures stay
atomic, and distances between them are exact 1-D Wasserstein costs computed
through the quantile coupling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InvalidSpecError

# relative tolerance under which two atom positions count as coincident
COINCIDENCE_RTOL = 1e-14
# absolute tolerance on the total mass of a probability measure
MASS_SUM_TOL = 1e-12

_SQRT2PI = float(np.sqrt(2.0 * np.pi))


def _npdf(z):
    return np.exp(-0.5 * np.asarray(z, dtype=float) ** 2) / _SQRT2PI


class DiscreteMeasure:
    """A probability measure made of finitely many weighted atoms.

    Parameters
    ----------
    positions : array-like, shape (n,)
        Atom locations. They are sorted on construction; atoms closer than
        ``1e-14 * max(1, |x|)`` are merged by summing their masses.
    masses : array-like, shape (n,)
        Strictly positive weights summing to 1 within ``1e-12``.
    """

    __slots__ = ("positions", "masses")

    def __init__(self, positions, masses):
        pos = np.atleast_1d(np.asarray(positions, dtype=float))
        mas = np.atleast_1d(np.asarray(masses, dtype=float))
        if pos.ndim != 1 or mas.ndim != 1 or pos.shape != mas.shape:
            raise InvalidSpecError("positions and masses must be 1-D of equal length")
        if pos.size == 0:
            raise InvalidSpecError("a measure needs at least one atom")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(mas))):
            raise InvalidSpecError("atom data must be finite")
        if np.any(mas <= 0.0):
            raise InvalidSpecError("atom masses must be positive")

        order = np.argsort(pos, kind="stable")
        pos = pos[order]
        mas = mas[order]

        # greedy consecutive merge of coincident atoms
        if pos.size > 1:
            gap = np.diff(pos)
            tol = COINCIDENCE_RTOL * np.maximum(1.0, np.abs(pos[1:]))
            new_group = np.concatenate([[True], gap > tol])
            if not np.all(new_group):
                starts = np.flatnonzero(new_group)
                merged_m = np.add.reduceat(mas, starts)
                merged_x = np.add.reduceat(mas * pos, starts) / merged_m
                pos, mas = merged_x, merged_m

        total = float(np.sum(mas))
        if abs(total - 1.0) > MASS_SUM_TOL:
            raise InvalidSpecError(f"masses must sum to 1 (got {total!r})")

        self.positions = pos
        self.masses = mas
        self.positions.flags.writeable = False
        self.masses.flags.writeable = False

    def __len__(self):
        return self.positions.size

    def __repr__(self):
        return f"DiscreteMeasure({len(self)} atoms on [{self.positions[0]:g}, {self.positions[-1]:g}])"

    @property
    def mean(self) -> float:
        return float(np.dot(self.masses, self.positions))

    @property
    def support_bounds(self) -> tuple[float, float]:
        return float(self.positions[0]), float(self.positions[-1])

    def quantile(self, q):
        """Right-continuous inverse CDF: the position of the first atom whose
        cumulative mass reaches ``q``."""
        q = np.asarray(q, dtype=float)
        cum = np.cumsum(self.masses)
        idx = np.minimum(np.searchsorted(cum, q, side="left"), len(self) - 1)
        out = self.positions[idx]
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {"kind": "atoms", "atoms": [[float(x), float(m)] for x, m in zip(self.positions, self.masses)]}


def second_moment(measure: DiscreteMeasure) -> float:
    """``sum_i m_i x_i**2`` of an atomic measure."""
    return float(np.dot(measure.masses, measure.positions**2))


def wasserstein1(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Exact 1-D Wasserstein-1 distance via the quantile (inverse-CDF) coupling.

    The coupling matches equal quantile levels, so the cost is a finite sum
    over the merged cumulative-mass grid of both measures.  Symmetric, and
    zero exactly when the two measures share atoms and masses.
    """
    ca = np.cumsum(a.masses)[:-1]
    cb = np.cumsum(b.masses)[:-1]
    edges = np.concatenate([[0.0], np.sort(np.concatenate([ca, cb])), [1.0]])
    widths = np.diff(edges)
    ia = np.minimum(np.searchsorted(ca, edges[:-1], side="right"), len(a) - 1)
    ib = np.minimum(np.searchsorted(cb, edges[:-1], side="right"), len(b) - 1)
    return float(np.dot(widths, np.abs(a.positions[ia] - b.positions[ib])))


class PiecewiseLinearFn:
    """Continuous piecewise-linear function given by knots ``(x_k, y_k)``.

    Outside the extreme knots the function continues with the slope of the
    nearest segment (constant-slope extrapolation).  Needs at least two knots
    with strictly increasing ``x``.
    """

    __slots__ = ("x", "y", "_cumtv")

    def __init__(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise InvalidSpecError("need >= 2 knots with matching values")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidSpecError("knots must be finite")
        if np.any(np.diff(x) <= 0.0):
            raise InvalidSpecError("knot positions must be strictly increasing")
        self.x = x
        self.y = y
        self.x.flags.writeable = False
        self.y.flags.writeable = False
        self._cumtv = None

    @classmethod
    def from_knots(cls, knots) -> "PiecewiseLinearFn":
        """Build from a sequence of ``(x, value)`` pairs."""
        arr = np.asarray(list(knots), dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InvalidSpecError("knots must be (x, value) pairs")
        return cls(arr[:, 0], arr[:, 1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        out = np.interp(tt, self.x, self.y)
        s = self.slopes
        left = tt < self.x[0]
        right = tt > self.x[-1]
        if np.any(left):
            out[left] = self.y[0] + s[0] * (tt[left] - self.x[0])
        if np.any(right):
            out[right] = self.y[-1] + s[-1] * (tt[right] - self.x[-1])
        return float(out[0]) if scalar else out

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.y) / np.diff(self.x)

    @property
    def max_abs_slope(self) -> float:
        return float(np.max(np.abs(self.slopes)))

    @property
    def knot_hull(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    @property
    def cumulative_variation(self) -> np.ndarray:
        """Total variation accumulated from the first knot, at each knot."""
        if self._cumtv is None:
            cum = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(self.y)))])
            cum.flags.writeable = False
            self._cumtv = cum
        return self._cumtv

    def total_variation(self, a: float, b: float) -> float:
        """Total variation of the (extrapolated) function over ``[a, b]``."""
        if b < a:
            raise ValueError("need a <= b")
        s = self.slopes
        lo = np.maximum(self.x[:-1], a)
        hi = np.minimum(self.x[1:], b)
        tv = float(np.dot(np.maximum(hi - lo, 0.0), np.abs(s)))
        if a < self.x[0]:
            tv += abs(s[0]) * (min(b, self.x[0]) - a)
        if b > self.x[-1]:
            tv += abs(s[-1]) * (b - max(a, self.x[-1]))
        return tv


# ---------------------------------------------------------------------------
# measure specifications


@dataclass(frozen=True)
class AtomsSpec:
    measure: DiscreteMeasure

    def mean(self) -> float:
        return self.measure.mean

    def second_moment(self) -> float:
        return second_moment(self.measure)

    def quantile(self, q):
        return self.measure.quantile(q)

    @property
    def support_bounds(self):
        return self.measure.support_bounds


@dataclass(frozen=True)
class UniformSpec:
    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b) and self.a < self.b):
            raise InvalidSpecError("uniform spec needs finite a < b")

    def mean(self) -> float:
        return 0.5 * (self.a + self.b)

    def second_moment(self) -> float:
        return (self.a**2 + self.a * self.b + self.b**2) / 3.0

    def quantile(self, q):
        return self.a + (self.b - self.a) * np.asarray(q, dtype=float)

    @property
    def support_bounds(self):
        return (self.a, self.b)


@dataclass(frozen=True)
class TruncatedGaussianSpec:
    mean_param: float
    sd: float
    a: float
    b: float

    def __post_init__(self):
        ok = np.isfinite([self.mean_param, self.sd, self.a, self.b]).all()
        if not (ok and self.sd > 0.0 and self.a < self.b):
            raise InvalidSpecError("truncated-gaussian spec needs sd > 0 and finite a < b")
        if self._phi_mass() <= 0.0:
            raise InvalidSpecError("truncation window carries no mass")

    def _alpha_beta(self):
        return (self.a - self.mean_param) / self.sd, (self.b - self.mean_param) / self.sd

    def _phi_mass(self) -> float:
        alpha, beta = self._alpha_beta()
        return float(ndtr(beta) - ndtr(alpha))

    def mean(self) -> float:
        alpha, beta = self._alpha_beta()
        z = self._phi_mass()
        return self.mean_param + self.sd * float(_npdf(alpha) - _npdf(beta)) / z

    def second_moment(self) -> float:
        alpha, beta = self._alpha_beta()
        z = self._phi_mass()
        frac = float(alpha * _npdf(alpha) - beta * _npdf(beta)) / z
        tail = float(_npdf(alpha) - _npdf(beta)) / z
        var = self.sd**2 * (1.0 + frac - tail**2)
        return var + self.mean() ** 2

    def quantile(self, q):
        alpha, beta = self._alpha_beta()
        fa = ndtr(alpha)
        z = self._phi_mass()
        q = np.asarray(q, dtype=float)
        out = self.mean_param + self.sd * ndtri(fa + q * z)
        return np.clip(out, self.a, self.b)

    @property
    def support_bounds(self):
        return (self.a, self.b)


@dataclass(frozen=True)
class PLDensitySpec:
    """Density proportional to a nonnegative piecewise-linear profile on its
    knot hull (zero outside)."""

    density: PiecewiseLinearFn

    def __post_init__(self):
        if np.any(self.density.y < 0.0):
            raise InvalidSpecError("density values must be nonnegative")
        if self._raw_mass() <= 0.0:
            raise InvalidSpecError("density must carry positive mass")

    def _raw_mass(self) -> float:
        x, y = self.density.x, self.density.y
        return float(np.sum(0.5 * (y[:-1] + y[1:]) * np.diff(x)))

    def _knot_cum_mass(self) -> np.ndarray:
        x, y = self.density.x, self.density.y
        seg = 0.5 * (y[:-1] + y[1:]) * np.diff(x)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def _segment_moment(self, seg: int, u0: float, u1: float, p: int) -> float:
        # integral of x**p * f(x) over [x_seg + u0, x_seg + u1], u relative offsets
        x0 = self.density.x[seg]
        c = self.density.y[seg]
        d = (self.density.y[seg + 1] - self.density.y[seg]) / (self.density.x[seg + 1] - x0)

        def prim(u):
            if p == 0:
                return c * u + d * u**2 / 2.0
            if p == 1:
                return x0 * (c * u + d * u**2 / 2.0) + c * u**2 / 2.0 + d * u**3 / 3.0
            if p == 2:
                return (
                    x0**2 * (c * u + d * u**2 / 2.0)
                    + 2.0 * x0 * (c * u**2 / 2.0 + d * u**3 / 3.0)
                    + c * u**3 / 3.0
                    + d * u**4 / 4.0
                )
            raise ValueError(p)

        return prim(u1) - prim(u0)

    def _moment(self, p: int) -> float:
        dx = np.diff(self.density.x)
        total = 0.0
        for seg in range(len(dx)):
            total += self._segment_moment(seg, 0.0, float(dx[seg]), p)
        return total / self._raw_mass()

    def mean(self) -> float:
        return self._moment(1)

    def second_moment(self) -> float:
        return self._moment(2)

    def _locate(self, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Segment index and in-segment offset where cumulative raw mass hits
        each target."""
        x, y = self.density.x, self.density.y
        cum = self._knot_cum_mass()
        segs = np.empty(targets.size, dtype=int)
        offs = np.empty(targets.size, dtype=float)
        for k, t in enumerate(targets):
            i = int(np.clip(np.searchsorted(cum, t, side="right") - 1, 0, len(x) - 2))
            # skip zero-mass segments that cannot absorb the remainder
            while i < len(x) - 2 and cum[i + 1] <= t:
                i += 1
            rem = t - cum[i]
            h = x[i + 1] - x[i]
            c = y[i]
            d = (y[i + 1] - y[i]) / h
            if rem <= 0.0:
                u = 0.0
            elif abs(d) * h < 1e-300 or abs(d) * h**2 < 1e-16 * max(c * h, 1e-300):
                u = rem / c if c > 0.0 else h
            else:
                disc = c * c + 2.0 * d * rem
                root = np.sqrt(max(disc, 0.0))
                # stable quadratic root inside [0, h]
                u = (root - c) / d if d > 0.0 else 2.0 * rem / (c + root)
            segs[k] = i
            offs[k] = min(max(u, 0.0), h)
        return segs, offs

    def quantile(self, q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        segs, offs = self._locate(q * self._raw_mass())
        out = self.density.x[segs] + offs
        return float(out[0]) if out.size == 1 and np.asarray(q).ndim == 0 else out

    @property
    def support_bounds(self):
        return self.density.knot_hull


MeasureSpec = AtomsSpec | UniformSpec | TruncatedGaussianSpec | PLDensitySpec


def parse_measure_spec(obj: dict) -> MeasureSpec:
    """Parse the JSON object form of a measure specification.

    Accepted shapes::

        {"kind": "uniform", "a": 0, "b": 1}
        {"kind": "atoms", "atoms": [[x, m], ...]}
        {"kind": "pl-density", "knots": [[x, f], ...]}
        {"kind": "truncated-gaussian", "mean": m, "sd": s, "a": a, "b": b}

    Unknown keys are rejected; an optional ``"format"`` key is tolerated.
    """
    if not isinstance(obj, dict):
        raise InvalidSpecError("measure spec must be a JSON object")
    obj = {k: v for k, v in obj.items() if k != "format"}
    kind = obj.get("kind")
    allowed = {
        "uniform": {"kind", "a", "b"},
        "atoms": {"kind", "atoms"},
        "pl-density": {"kind", "knots"},
        "truncated-gaussian": {"kind", "mean", "sd", "a", "b"},
    }
    if kind not in allowed:
        raise InvalidSpecError(f"unknown measure kind {kind!r}")
    extra = set(obj) - allowed[kind]
    if extra:
        raise InvalidSpecError(f"unknown keys in measure spec: {sorted(extra)}")
    missing = allowed[kind] - set(obj)
    if missing:
        raise InvalidSpecError(f"missing keys in measure spec: {sorted(missing)}")

    if kind == "uniform":
        return UniformSpec(float(obj["a"]), float(obj["b"]))
    if kind == "atoms":
        atoms = np.asarray(obj["atoms"], dtype=float)
        if atoms.ndim != 2 or atoms.shape[1] != 2:
            raise InvalidSpecError("atoms must be [position, mass] pairs")
        return AtomsSpec(DiscreteMeasure(atoms[:, 0], atoms[:, 1]))
    if kind == "pl-density":
        return PLDensitySpec(PiecewiseLinearFn.from_knots(obj["knots"]))
    return TruncatedGaussianSpec(float(obj["mean"]), float(obj["sd"]), float(obj["a"]), float(obj["b"]))


def measure_spec_to_dict(spec: MeasureSpec) -> dict:
    if isinstance(spec, UniformSpec):
        return {"kind": "uniform", "a": spec.a, "b": spec.b}
    if isinstance(spec, AtomsSpec):
        return spec.measure.to_dict()
    if isinstance(spec, PLDensitySpec):
        return {"kind": "pl-density", "knots": [[float(x), float(f)] for x, f in zip(spec.density.x, spec.density.y)]}
    if isinstance(spec, TruncatedGaussianSpec):
        return {"kind": "truncated-gaussian", "mean": spec.mean_param, "sd": spec.sd, "a": spec.a, "b": spec.b}
    raise TypeError(type(spec))


# ---------------------------------------------------------------------------
# quantile discretization


def discretize(spec: MeasureSpec, n: int) -> DiscreteMeasure:
    """Quantile discretization: ``n`` equal-mass atoms at the conditional means
    of the equal-mass quantile blocks.

    Placing atoms at conditional means (not block midpoints) preserves the
    mean of the spec exactly and makes the second moment converge to the
    spec's from below.  Coincident block means (e.g. a heavy atom spanning
    several blocks) are merged, so the result may have fewer than ``n`` atoms.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidSpecError("n must be a positive integer")
    n = int(n)
    if isinstance(spec, UniformSpec):
        k = np.arange(n, dtype=float)
        means = spec.a + (spec.b - spec.a) * (2.0 * k + 1.0) / (2.0 * n)
    elif isinstance(spec, AtomsSpec):
        means = _atom_block_means(spec.measure, n)
    elif isinstance(spec, TruncatedGaussianSpec):
        means = _gaussian_block_means(spec, n)
    elif isinstance(spec, PLDensitySpec):
        means = _pl_block_means(spec, n)
    else:
        raise InvalidSpecError(f"unsupported spec {type(spec).__name__}")
    return DiscreteMeasure(means, np.full(n, 1.0 / n))


def _atom_block_means(measure: DiscreteMeasure, n: int) -> np.ndarray:
    # H(q) = integral of the quantile function up to level q is piecewise
    # linear with knots at the cumulative masses, so block means are exact.
    cum = np.concatenate([[0.0], np.cumsum(measure.masses)])
    cum[-1] = 1.0
    hknots = np.concatenate([[0.0], np.cumsum(measure.masses * measure.positions)])
    q = np.arange(n + 1, dtype=float) / n
    h = np.interp(q, cum, hknots)
    return np.diff(h) * n


def _gaussian_block_means(spec: TruncatedGaussianSpec, n: int) -> np.ndarray:
    alpha, beta = spec._alpha_beta()
    z = spec._phi_mass()
    fa = float(ndtr(alpha))
    q = np.arange(1, n, dtype=float) / n
    edges = np.empty(n + 1)
    edges[0], edges[-1] = alpha, beta
    edges[1:-1] = ndtri(fa + q * z)
    pdf = _npdf(edges)
    block_mass = z / n
    return spec.mean_param + spec.sd * (pdf[:-1] - pdf[1:]) / block_mass


def _pl_block_means(spec: PLDensitySpec, n: int) -> np.ndarray:
    raw = spec._raw_mass()
    targets = np.arange(n + 1, dtype=float) / n * raw
    segs, offs = spec._locate(targets)
    segs[0], offs[0] = 0, 0.0
    segs[-1] = len(spec.density.x) - 2
    offs[-1] = spec.density.x[-1] - spec.density.x[-2]

    cum_x = np.concatenate(
        [[0.0], np.cumsum([spec._segment_moment(s, 0.0, float(d), 1) for s, d in
                           enumerate(np.diff(spec.density.x))])]
    )

    def first_moment_to(seg, off):
        return cum_x[seg] + spec._segment_moment(int(seg), 0.0, float(off), 1)

    fm = np.array([first_moment_to(s, o) for s, o in zip(segs, offs)])
    return np.diff(fm) / (raw / n)
