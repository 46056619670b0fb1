# -*- coding: utf-8 -*-
"""Refinement studies: simulate ever finer quantile discretizations of the
same initial data and measure how the flow maps and transported measures
settle down.

Convergence is reported, not assumed: the study records the grid
sup-differences between consecutive levels, the Wasserstein distances of the
transported measures, and joint-distribution moment gaps, and flags whether
they decrease across levels.  Only a blow-up at the finest pair (growth above
``HARD_FAIL_GROWTH``) is treated as a hard failure, since the underlying
theory guarantees subsequential limits rather than rates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ParticleInit, TrajectorySet, simulate
from .errors import InvalidGridError, InvalidSpecError
from .flow_map import FlowMap
from .measures import DiscreteMeasure, MeasureSpec, PiecewiseLinearFn, discretize, wasserstein1
from .weak_solution import _bump

HARD_FAIL_GROWTH = 2.0
FINAL_THRESHOLD_FACTOR = 10.0


@dataclass(frozen=True)
class LevelResult:
    n: int
    measure: DiscreteMeasure
    traj: TrajectorySet
    flow: FlowMap
    grid_values: dict  # t -> np.ndarray over the grid
    lipschitz_time_residual: float
    uniform_bound: float  # max |X(y,t)| / ((1+t)(1+|y|)) over grid x times


@dataclass(frozen=True)
class PairRow:
    levels: tuple[int, int]
    t: float
    grid_sup: float
    w1: float
    joint: float

    def to_dict(self) -> dict:
        return {"level_pair": list(self.levels), "t": self.t,
                "D": self.grid_sup, "W1": self.w1, "joint": self.joint}


@dataclass(frozen=True)
class RefinementStudy:
    spec: MeasureSpec
    v0: PiecewiseLinearFn
    levels: tuple[int, ...]
    times: tuple[float, ...]
    grid: np.ndarray
    results: tuple[LevelResult, ...]
    rows: tuple[PairRow, ...] = field(default_factory=tuple)

    def pair_rows(self, metric: str = "grid_sup"):
        return {(r.levels, r.t): getattr(r, metric) for r in self.rows}

    def monotone(self, metric: str = "grid_sup") -> bool:
        """True when the metric decreases across every consecutive level pair
        at every sampled time."""
        for t in self.times:
            vals = [getattr(r, metric) for r in self.rows if r.t == t]
            if any(b >= a for a, b in zip(vals[:-1], vals[1:])):
                return False
        return True

    def hard_failure(self) -> bool:
        """Growth by more than HARD_FAIL_GROWTH at the finest pair."""
        for t in self.times:
            vals = [r.grid_sup for r in self.rows if r.t == t]
            if len(vals) >= 2 and vals[-1] > HARD_FAIL_GROWTH * max(vals[-2], 1e-300):
                return True
        return False

    def final_threshold(self) -> float:
        finest = [r.grid_sup for r in self.rows if r.levels == (self.levels[-2], self.levels[-1])]
        return FINAL_THRESHOLD_FACTOR * max(finest) if finest else math.inf

    def summary(self) -> dict:
        return {
            "levels": list(self.levels),
            "times": list(self.times),
            "monotone_D": self.monotone("grid_sup"),
            "monotone_W1": self.monotone("w1"),
            "hard_failure": self.hard_failure(),
            "final_threshold": self.final_threshold(),
            "uniform_bound_level0": self.results[0].uniform_bound,
            "uniform_bound_exceeded": any(
                r.uniform_bound > self.results[0].uniform_bound * (1.0 + 1e-9)
                for r in self.results[1:]
            ),
            "lipschitz_time_worst": max(r.lipschitz_time_residual for r in self.results),
            "rows": [r.to_dict() for r in self.rows],
        }


def _run_level(spec, v0, n, times, grid) -> LevelResult:
    measure = discretize(spec, n)
    init = ParticleInit(measure.masses, measure.positions, v0(measure.positions))
    traj = simulate(init, max(times))
    flow = FlowMap(traj, v0)
    grid_values = {t: flow.eval(grid, t) for t in times}

    # discrete L2 Lipschitz-in-time bound against the initial speed
    speed = float(np.sqrt(np.dot(init.masses, init.velocities**2)))
    sample = np.unique(np.concatenate([[0.0], np.asarray(times)]))
    states = {t: traj.state_at(t)[0] for t in sample}
    lip_res = 0.0
    for a, b in zip(sample[:-1], sample[1:]):
        d = float(np.sqrt(np.dot(init.masses, (states[b] - states[a]) ** 2)))
        lip_res = max(lip_res, d - (b - a) * speed)

    bound = 0.0
    for t in times:
        bound = max(bound, float(np.max(np.abs(grid_values[t]) / ((1.0 + t) * (1.0 + np.abs(grid))))))
    return LevelResult(n, measure, traj, flow, grid_values, lip_res, bound)


def refinement_study(spec: MeasureSpec, v0: PiecewiseLinearFn, levels, times,
                     grid=None, grid_points: int = 33, threads: int | None = None) -> RefinementStudy:
    """Discretize, simulate and compare consecutive refinement levels.

    The default evaluation grid is the interior quantiles of the continuum
    spec, so every level's atoms approximate the same grid; grid points must
    lie inside the spec's support.
    """
    levels = tuple(int(n) for n in levels)
    if len(levels) < 2 or any(b <= a for a, b in zip(levels[:-1], levels[1:])):
        raise InvalidSpecError("need at least two strictly increasing levels")
    times = tuple(float(t) for t in times)
    if not times or any(t < 0 for t in times):
        raise InvalidSpecError("need nonnegative sample times")

    lo, hi = spec.support_bounds
    if grid is None:
        qs = (np.arange(grid_points, dtype=float) + 1.0) / (grid_points + 1.0)
        grid = np.asarray(spec.quantile(qs), dtype=float)
    else:
        grid = np.asarray(grid, dtype=float)
        if np.any(grid < lo) or np.any(grid > hi):
            raise InvalidGridError("grid points must lie inside the spec support")

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda n: _run_level(spec, v0, n, times, grid), levels))
    else:
        results = [_run_level(spec, v0, n, times, grid) for n in levels]

    study = RefinementStudy(spec, v0, levels, times, grid, tuple(results))
    rows = []
    for (ra, rb) in zip(results[:-1], results[1:]):
        for t in times:
            rows.append(PairRow(
                levels=(ra.n, rb.n),
                t=t,
                grid_sup=float(np.max(np.abs(ra.grid_values[t] - rb.grid_values[t]))),
                w1=wasserstein1(_pushforward(ra, t), _pushforward(rb, t)),
                joint=joint_distance_from_results(spec, ra, rb, t),
            ))
    return RefinementStudy(spec, v0, levels, times, grid, tuple(results), tuple(rows))


def _pushforward(res: LevelResult, t: float) -> DiscreteMeasure:
    pos, _, _ = res.traj.state_at(t)
    return DiscreteMeasure(pos, res.measure.masses)


def _joint_family(spec: MeasureSpec, t: float):
    lo, hi = spec.support_bounds
    c = 0.5 * (lo + hi)
    r = 0.75 * (hi - lo) if hi > lo else 1.0
    ry = r * (1.0 + t)
    return (
        ("x", lambda x, y: x),
        ("y", lambda x, y: y),
        ("x^2", lambda x, y: x * x),
        ("y^2", lambda x, y: y * y),
        ("xy", lambda x, y: x * y),
        ("bump_x", lambda x, y: _bump((x - c) / r)),
        ("bump_xy", lambda x, y: _bump((x - c) / r) * _bump((y - c) / ry)),
    )


def joint_distance_from_results(spec, ra: LevelResult, rb: LevelResult, t: float) -> float:
    """Largest moment gap between the joint (start, arrival) distributions of
    two levels over a fixed test family."""
    out = 0.0
    for _, h in _joint_family(spec, t):
        vals = []
        for res in (ra, rb):
            x = res.measure.positions
            y = res.traj.state_at(t)[0]
            vals.append(float(np.dot(res.measure.masses, h(x, y))))
        out = max(out, abs(vals[0] - vals[1]))
    return out


def joint_distance(study: RefinementStudy, level_a: int, level_b: int, t: float) -> float:
    try:
        ra = next(r for r in study.results if r.n == level_a)
        rb = next(r for r in study.results if r.n == level_b)
    except StopIteration as exc:
        raise InvalidSpecError(f"levels {level_a}, {level_b} not in study") from exc
    return joint_distance_from_results(study.spec, ra, rb, float(t))
