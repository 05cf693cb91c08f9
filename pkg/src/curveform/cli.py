"""``curveform`` command-line entry point.

Exit codes: 0 success, 1 unexpected error, 2 usage error, 3 invalid input
(parse or validation failure, including a graph without a rooted spanning
tree), 4 file-system error, 5 numerical abort during simulation.
Set ``CURVEFORM_LOG_LEVEL`` (e.g. ``INFO``, ``DEBUG``) for progress logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from curveform import fileio
from curveform.curves import BasisFamily, ParametricCurve, fit_coefficients, fit_residuals
from curveform.errors import CurveformError, FormatError, InvalidArgument, NumericalAbort, ScenarioError
from curveform.simulation import run_scenario, sweep
from curveform.topology import build_laplacian, has_rooted_spanning_tree, leader_selector, reachable_from, theorem1_matrices

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_IO = 4
EXIT_NUMERICAL = 5

log = logging.getLogger("curveform")


def _fmt_vec(values) -> str:
    return "[" + ", ".join(f"{float(v):.6g}" for v in values) + "]"


def cmd_fit(args) -> int:
    samples = fileio.read_samples_csv(args.samples)
    family = BasisFamily(args.family, args.order)
    xi = fit_coefficients(samples, family)
    res = fit_residuals(samples, family, xi)
    stats = {"samples": len(samples), "residual_max": float(res.max()), "residual_rms": float(np.sqrt(np.mean(res**2)))}
    fileio.save_curve(args.out, ParametricCurve(family, xi), stats)
    print(f"fitted {family} to {len(samples)} samples -> {args.out}")
    print(f"residual max {stats['residual_max']:.3e}, rms {stats['residual_rms']:.3e}")
    return EXIT_OK


def cmd_check_graph(args) -> int:
    topo = fileio.load_topology(args.topology)
    n = topo.n
    ok = has_rooted_spanning_tree(topo, 0)
    if not ok:
        missing = [int(i) + 1 for i in np.flatnonzero(~reachable_from(topo, 0))]
        print(f"no rooted spanning tree at agent 1 (unreachable: {missing})")
        return EXIT_INVALID
    print(f"rooted spanning tree at agent 1: yes ({n} agents)")
    if topo.leader_has_inputs:
        print("leader (agent 1) receives information: not a leader-follower topology")
        return EXIT_INVALID
    thm = theorem1_matrices(build_laplacian(topo), leader_selector(n))
    print(f"q = {_fmt_vec(thm.q)}")
    print(f"p = {_fmt_vec(thm.p)}")
    print(f"diag(P) = {_fmt_vec(np.diag(thm.P))}")
    print(f"min eig P = {thm.min_eig_P:.6g}")
    print(f"min eig Q = {thm.min_eig_Q:.6g}")
    print(f"positive definite: {'yes' if thm.positive_definite else 'no'}")
    return EXIT_OK if thm.positive_definite else EXIT_INVALID


def _apply_cli_overrides(scenario, args):
    changes = {}
    for key in ("seed", "dt", "duration"):
        value = getattr(args, key, None)
        if value is not None:
            changes[key] = value
    if getattr(args, "method", None):
        changes["integrator"] = args.method
    return replace(scenario, **changes) if changes else scenario


def cmd_simulate(args) -> int:
    scenario, doc = fileio.load_scenario(args.scenario)
    scenario = _apply_cli_overrides(scenario, args)
    try:
        result = run_scenario(scenario)
    except NumericalAbort as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        if exc.log is not None and len(exc.log):
            fileio.write_run_artifacts(args.out, exc.log, doc)
        return EXIT_NUMERICAL
    arts = fileio.write_run_artifacts(args.out, result, doc)
    s = result.summary()
    print(f"wrote {arts.trajectory}, {arts.metrics}, {arts.summary}")
    print(f"terminal error norm {s['terminal_error_norm']:.6g} (initial {s['initial_error_norm']:.6g})")
    print(f"max |k2 dhat - d| {s['terminal_disturbance_error']:.6g}, max |theta dot| {s['terminal_heading_rate']:.6g}")
    return EXIT_OK


def cmd_eval_curve(args) -> int:
    curve = fileio.load_curve(args.curve)
    if args.s is not None:
        s = np.asarray(args.s, dtype=float)
    else:
        if args.count < 1:
            raise InvalidArgument("--count must be at least 1")
        s = np.linspace(0.0, 1.0, args.count)
    points = curve(s)
    if args.out is None:
        fileio.write_points_csv(sys.stdout, s, points)
    else:
        fileio.write_points_csv(args.out, s, points)
    return EXIT_OK


def _parse_param(text: str):
    if "=" not in text:
        raise InvalidArgument(f"--param expects name=v1,v2,..., got {text!r}")
    name, values = text.split("=", 1)
    out = []
    for v in values.split(","):
        v = v.strip()
        try:
            out.append(int(v) if name in ("seed",) else float(v))
        except ValueError:
            out.append(v)
    return name.strip(), out


def cmd_sweep(args) -> int:
    scenario, _ = fileio.load_scenario(args.scenario)
    scenario = _apply_cli_overrides(scenario, args)
    grid = dict(_parse_param(p) for p in args.param)
    results = sweep(scenario, grid, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_sweep_csv(out / "sweep.csv", results)
    for res in results:
        if res.ok:
            print(f"{res.params}: terminal error {res.summary['terminal_error_norm']:.4g}")
        else:
            print(f"{res.params}: FAILED {res.error}")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curveform", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="least-squares fit of curve coefficients to s,x,y samples")
    p.add_argument("samples", help="CSV with columns s,x,y")
    p.add_argument("--family", choices=["fourier", "polynomial"], required=True)
    p.add_argument("--order", type=int, required=True, help="harmonics (fourier) or degree (polynomial)")
    p.add_argument("--out", required=True, help="curve file to write")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("check-graph", help="spanning-tree and Lyapunov-matrix diagnostics")
    p.add_argument("topology", help="topology file or scenario file")
    p.set_defaults(func=cmd_check_graph)

    def add_run_flags(p):
        p.add_argument("--scenario", required=True)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--duration", type=float)
        p.add_argument("--method", choices=["euler", "rk4"])

    p = sub.add_parser("simulate", help="run a scenario and write trajectory/metrics/summary")
    add_run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval-curve", help="evaluate a curve file at parameters")
    p.add_argument("curve")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--s", type=float, nargs="+", help="explicit parameter values in [0, 1]")
    grp.add_argument("--count", type=int, help="evenly spaced parameters over [0, 1]")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_eval_curve)

    p = sub.add_parser("sweep", help="run a scenario over a parameter grid")
    add_run_flags(p)
    p.add_argument("--param", action="append", required=True, help="name=v1,v2,... (repeatable)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("CURVEFORM_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print("invalid scenario:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_INVALID
    except (FormatError, CurveformError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
