# -*- coding: utf-8 -*-
"""Command-line interface: simulate / flow / verify / converge / weak-residual.

All structured I/O is JSON tagged with ``"format": "sticky-flow/1"``; CSV is
only emitted for plotting exports.  Exit codes: 0 success (all checks pass),
1 a verification check failed (the report is still written), 2 usage or input
errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import verification as ver
from .convergence import refinement_study
from .dynamics import (FORMAT_TAG, ParticleInit, simulate, trajectory_to_csv,
                       trajectory_to_dict)
from .errors import StickyFlowError
from .flow_map import FlowMap
from .measures import PiecewiseLinearFn, parse_measure_spec
from .weak_solution import WeakSolutionView, random_bumps
from .verification import _position_bounds

CHECK_NAMES = ("qspp", "gap-bound", "gap-concavity", "averaging", "energy", "momentum",
               "order-stickiness", "oleinik", "flow-equation", "weak-mass", "weak-momentum",
               "oracle")


def _read_json(path: str):
    if path == "-":
        return json.load(sys.stdin)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _load_init(path: str) -> ParticleInit:
    return ParticleInit.from_dict(_read_json(path))


def _run_checks(traj, init, args) -> list:
    reports = []
    for name in args.checks:
        kw = {}
        if args.tol is not None:
            kw["tol"] = args.tol
        if name == "qspp":
            rep = ver.check_qspp(traj, args.samples, args.seed, **kw)
        elif name == "gap-bound":
            rep = ver.check_gap_bound(traj, None, args.samples, args.seed, **kw)
        elif name == "gap-concavity":
            rep = ver.check_gap_concavity(traj, **kw)
        elif name == "averaging":
            rep = ver.check_averaging(traj, samples=args.samples, seed=args.seed, **kw)
        elif name == "energy":
            rep = ver.check_energy(traj, args.samples, args.seed, **kw)
        elif name == "momentum":
            rep = ver.check_momentum(traj, args.samples, args.seed)
        elif name == "order-stickiness":
            rep = ver.check_order_stickiness(traj, args.samples, args.seed, **kw)
        elif name == "oleinik":
            rep = ver.check_oleinik(traj, max(args.samples // 2, 5), args.seed, **kw)
        elif name == "flow-equation":
            rep = ver.check_flow_equation(traj, 20, args.seed, **kw)
        elif name == "weak-mass":
            rep = ver.check_weak_form(traj, "mass", args.bumps, args.seed, args.order, **kw)
        elif name == "weak-momentum":
            rep = ver.check_weak_form(traj, "momentum", args.bumps, args.seed, args.order, **kw)
        elif name == "oracle":
            rep = ver.compare_oracle(init, traj.t_end, args.dt, args.tol or 1e-3)
        else:
            raise StickyFlowError(f"unknown check {name!r}")
        reports.append(rep)
    return reports


def _cmd_simulate(args) -> int:
    init = _load_init(args.input)
    traj = simulate(init, args.t_end)
    _write_text(args.output, _dump(trajectory_to_dict(traj)))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            trajectory_to_csv(traj, fh)
    return 0


def _cmd_flow(args) -> int:
    init = _load_init(args.input)
    traj = simulate(init, args.t_end)
    flow = FlowMap(traj)
    times = _floats(args.times)
    if args.ys:
        ys = np.asarray(_floats(args.ys))
    else:
        lo, hi = float(init.positions[0]), float(init.positions[-1])
        ys = np.linspace(lo, hi, args.grid_points)
    lines = ["y,t,X"]
    for t in times:
        vals = flow.eval(ys, t)
        lines.extend(f"{float(y)!r},{float(t)!r},{float(x)!r}" for y, x in zip(ys, vals))
    _write_text(args.output, "\n".join(lines) + "\n")
    return 0


def _instance_reports(args, k: int, n: int):
    init = ver.random_instance(args.seed + 1 + k, int(n))
    traj = simulate(init, args.t_end)
    return _run_checks(traj, init, args)


def _cmd_verify(args) -> int:
    args.checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    for c in args.checks:
        if c not in CHECK_NAMES:
            raise StickyFlowError(f"unknown check {c!r}; known: {', '.join(CHECK_NAMES)}")

    if args.input is not None:
        init = _load_init(args.input)
        traj = simulate(init, args.t_end)
        reports = _run_checks(traj, init, args)
    elif args.instances:
        rng = np.random.default_rng(args.seed)
        if ":" in args.n:
            lo, hi = args.n.split(":")
        else:
            lo = hi = args.n
        ns = rng.integers(int(lo), int(hi) + 1, args.instances)
        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                per_instance = list(pool.map(lambda item: _instance_reports(args, *item), enumerate(ns)))
        else:
            per_instance = [_instance_reports(args, k, n) for k, n in enumerate(ns)]
        reports = [ver.combine_reports([inst[i] for inst in per_instance])
                   for i in range(len(args.checks))]
    else:
        raise StickyFlowError("need either --input or --instances")

    payload = {
        "format": FORMAT_TAG,
        "seed": args.seed,
        "checks": [r.to_dict() for r in reports],
        "all_pass": all(r.passed for r in reports),
    }
    _write_text(args.output, _dump(payload))
    return 0 if payload["all_pass"] else 1


def _cmd_converge(args) -> int:
    spec = parse_measure_spec(_read_json(args.spec))
    v0_obj = _read_json(args.v0)
    extra = set(v0_obj) - {"format", "knots"}
    if extra:
        raise StickyFlowError(f"unknown keys in v0 file: {sorted(extra)}")
    v0 = PiecewiseLinearFn.from_knots(v0_obj["knots"])
    study = refinement_study(spec, v0, _ints(args.levels), _floats(args.times),
                             grid_points=args.grid_points, threads=args.threads)
    payload = {"format": FORMAT_TAG, **study.summary()}
    _write_text(args.output, _dump(payload))
    return 1 if study.hard_failure() else 0


def _cmd_weak_residual(args) -> int:
    init = _load_init(args.input)
    traj = simulate(init, args.t_end)
    view = WeakSolutionView(traj)
    x_lo, x_hi = _position_bounds(traj)
    span = max(x_hi - x_lo, 1.0)
    bumps = random_bumps(args.bumps, x_lo - 0.25 * span, x_hi + 0.25 * span, traj.t_end, args.seed)
    rows = []
    for which in args.which.split(","):
        which = which.strip()
        for k, phi in enumerate(bumps):
            rows.append({
                "which": which, "bump": k, "order": args.order,
                "center": phi.center, "radius": phi.radius,
                "t_lo": phi.t_lo, "t_hi": phi.t_hi,
                "residual": view.weak_form_residual(phi, which=which, order=args.order),
            })
    _write_text(args.output, _dump({"format": FORMAT_TAG, "seed": args.seed, "residuals": rows}))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stickyflow",
                                description="Event-driven sticky particle simulator and verifier")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the event-driven dynamics")
    sim.add_argument("--input", required=True, help="particles JSON ('-' for stdin)")
    sim.add_argument("--t-end", type=float, required=True, dest="t_end")
    sim.add_argument("--output", default=None, help="trajectory JSON (stdout by default)")
    sim.add_argument("--csv", default=None, help="also write breakpoints CSV")
    sim.set_defaults(func=_cmd_simulate)

    flow = sub.add_parser("flow", help="evaluate the flow map on a grid")
    flow.add_argument("--input", required=True)
    flow.add_argument("--t-end", type=float, required=True, dest="t_end")
    flow.add_argument("--times", required=True, help="comma-separated times")
    flow.add_argument("--ys", default=None, help="comma-separated start positions")
    flow.add_argument("--grid-points", type=int, default=21, dest="grid_points")
    flow.add_argument("--output", default=None, help="CSV output (stdout by default)")
    flow.set_defaults(func=_cmd_flow)

    verify = sub.add_parser("verify", help="run property checks")
    verify.add_argument("--input", default=None, help="particles JSON; omit to sweep random instances")
    verify.add_argument("--t-end", type=float, default=3.0, dest="t_end")
    verify.add_argument("--checks", default="qspp,gap-bound,gap-concavity,averaging,energy,momentum,oleinik")
    verify.add_argument("--instances", type=int, default=0, help="number of random instances")
    verify.add_argument("--n", default="2:500", help="particle count or lo:hi range for random instances")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--samples", type=int, default=50)
    verify.add_argument("--tol", type=float, default=None, help="override check tolerance")
    verify.add_argument("--order", type=int, default=12, help="Gauss order for weak-form checks")
    verify.add_argument("--bumps", type=int, default=10)
    verify.add_argument("--dt", type=float, default=1e-5, help="oracle step for the oracle check")
    verify.add_argument("--threads", type=int, default=1)
    verify.add_argument("--output", default=None)
    verify.set_defaults(func=_cmd_verify)

    conv = sub.add_parser("converge", help="refinement study over discretization levels")
    conv.add_argument("--spec", required=True, help="measure spec JSON")
    conv.add_argument("--v0", required=True, help="initial velocity knots JSON")
    conv.add_argument("--levels", required=True, help="comma-separated atom counts")
    conv.add_argument("--times", required=True)
    conv.add_argument("--grid-points", type=int, default=33, dest="grid_points")
    conv.add_argument("--threads", type=int, default=1)
    conv.add_argument("--output", default=None)
    conv.set_defaults(func=_cmd_converge)

    weak = sub.add_parser("weak-residual", help="weak-form residuals for random bumps")
    weak.add_argument("--input", required=True)
    weak.add_argument("--t-end", type=float, required=True, dest="t_end")
    weak.add_argument("--which", default="mass,momentum")
    weak.add_argument("--order", type=int, default=12)
    weak.add_argument("--bumps", type=int, default=10)
    weak.add_argument("--seed", type=int, default=0)
    weak.add_argument("--output", default=None)
    weak.set_defaults(func=_cmd_weak_residual)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StickyFlowError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"stickyflow: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
