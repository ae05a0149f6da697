"""Command-line interface.

Exit status: 0 on success (feasible / verified), 2 when the input is valid but
the problem is infeasible or the certificate fails, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .errors import ProblemParseError, TilqError
from .feedback import solve_feedback
from .fixtures import format_table, run_examples
from .linalg import Tolerances
from .open_loop import demonstrate_inconsistency, solve_open_loop, standard_lq_for_anchor
from .problem import InitialPair, load_problem
from .report import (feedback_to_dict, jsonable, open_loop_to_dict, render, standard_to_dict)
from .simulation import (ENUMERATION_CAP, NoiseModel, PolicySpec, build_tree, enumerate_paths,
                         monte_carlo_cost, simulate, trajectories_to_csv, tree_costs)
from .verify import DEFAULT_PROBES, verify_feedback, verify_open_loop

log = logging.getLogger("tilq")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
COMMANDS = ("solve-open-loop", "solve-feedback", "solve-standard", "verify", "simulate",
            "demo-inconsistency", "examples")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", metavar="PATH", help="problem file (JSON)")
    common.add_argument("--output", metavar="PATH", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--t", type=int, default=0, help="initial time / anchor")
    common.add_argument("--x", metavar="CSV", help="initial state as comma-separated floats (default all ones)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--probes", type=int, default=DEFAULT_PROBES)
    common.add_argument("--rcond", type=float, help="relative singular-value cutoff for pseudoinverses")
    common.add_argument("--residual-tol", type=float, default=1e-9)
    common.add_argument("--psd-margin", type=float, default=1e-9)
    common.add_argument("--timing", action="store_true",
                        help="record wall-clock time in timing_ms (makes reports run-dependent)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tilq", description="Time-inconsistent stochastic LQ solver.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve-open-loop", parents=[common], help="open-loop equilibrium (Riccati + Lyapunov)")
    sub.add_parser("solve-feedback", parents=[common], help="linear feedback equilibrium strategy")
    sub.add_parser("solve-standard", parents=[common], help="pre-commitment solve anchored at --t")
    v = sub.add_parser("verify", parents=[common], help="certify a solver output by path enumeration")
    v.add_argument("--concept", choices=("open-loop", "feedback"), default="feedback")
    v.add_argument("--gains", metavar="PATH",
                   help="JSON list of candidate matrices to verify instead of the solver output")
    s = sub.add_parser("simulate", parents=[common], help="enumerate or sample equilibrium trajectories")
    s.add_argument("--concept", choices=("open-loop", "feedback"), default="feedback")
    s.add_argument("--samples", type=int, default=0, help="Monte Carlo samples (0 enumerates every path)")
    d = sub.add_parser("demo-inconsistency", parents=[common], help="compare re-anchored standard gains")
    d.add_argument("--t1", type=int, default=1, help="later anchor (the earlier one is --t)")
    sub.add_parser("examples", parents=[common], help="reproduce the embedded worked examples")
    return parser


def _tolerances(args) -> Tolerances:
    return Tolerances(pinv_rcond=args.rcond, psd_margin=args.psd_margin,
                      residual_tol=args.residual_tol, symmetry_tol=1e-9)


def _load(args, tol):
    if not args.input:
        raise TilqError(f"{args.command} needs --input")
    path = Path(args.input)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TilqError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return load_problem(text, tol)
    except ProblemParseError as exc:
        raise TilqError(f"{path}: {exc}") from None


def _start(args, p) -> InitialPair:
    if args.x:
        try:
            x = np.array([float(v) for v in args.x.split(",")])
        except ValueError:
            raise TilqError(f"--x must be comma-separated numbers, got {args.x!r}") from None
    else:
        x = np.ones(p.n)
    if x.shape != (p.n,):
        raise TilqError(f"--x has {x.size} entries, state dimension is {p.n}")
    if not 0 <= args.t < p.N:
        raise TilqError(f"--t {args.t} outside 0..{p.N - 1}")
    return InitialPair(args.t, x)


def _candidate(args):
    try:
        data = json.loads(Path(args.gains).read_text())
        return [np.array(m, dtype=float) for m in data]
    except (OSError, ValueError, TypeError) as exc:
        raise TilqError(f"cannot read candidate gains from {args.gains}: {exc}") from None


def run(args) -> tuple:
    """Execute one command; returns ``(exit_code, report_dict_or_text)``."""
    tol = _tolerances(args)
    cmd = args.command
    if cmd == "examples":
        results = run_examples(tol=tol)
        ok = all(r.passed for r in results)
        report = {
            "command": cmd, "feasible": ok,
            "solution": {r.name: {"passed": r.passed,
                                  "rows": [vars(row) for row in r.rows]} for r in results},
            "diagnostics": {"table": format_table(results).splitlines()},
        }
        return (EXIT_OK if ok else EXIT_ERROR), report

    p = _load(args, tol)
    if cmd == "solve-open-loop":
        sol = solve_open_loop(p, tol)
        body, feasible = open_loop_to_dict(sol), sol.feasible
    elif cmd == "solve-feedback":
        sol = solve_feedback(p, tol)
        body, feasible = feedback_to_dict(sol), sol.feasible
    elif cmd == "solve-standard":
        if not 0 <= args.t < p.N:
            raise TilqError(f"--t {args.t} outside 0..{p.N - 1}")
        sol = standard_lq_for_anchor(p, args.t, tol)
        body, feasible = standard_to_dict(sol), sol.feasible
    elif cmd == "demo-inconsistency":
        rep = demonstrate_inconsistency(p, args.t, args.t1, tol)
        body = {"solution": {"t0": rep.t0, "t1": rep.t1, "gain_planned": rep.gain_t0.tolist(),
                             "gain_replanned": rep.gain_t1.tolist(), "difference": rep.difference},
                "diagnostics": {"time_inconsistent": rep.difference > tol.residual_tol}}
        feasible = all(s.feasible for s in rep.solutions)
    elif cmd == "verify":
        body, feasible = _verify(args, p, tol)
    elif cmd == "simulate":
        return _simulate(args, p, tol)
    else:  # pragma: no cover - argparse restricts choices
        raise TilqError(f"unknown command {cmd}")
    report = {"command": cmd, "feasible": bool(feasible), **body}
    return (EXIT_OK if feasible else EXIT_INFEASIBLE), report


def _verify(args, p, tol):
    start = _start(args, p)
    if args.concept == "open-loop":
        if args.gains:
            cand = _candidate(args)
        else:
            sol = solve_open_loop(p, tol)
            cand = sol.gains
        rep = verify_open_loop(p, start, cand, probes=args.probes, seed=args.seed, tol=tol)
    else:
        cand = _candidate(args) if args.gains else solve_feedback(p, tol).Phi
        rep = verify_feedback(p, cand, start, probes=args.probes, seed=args.seed, tol=tol)
    d = rep.to_dict()
    return {"solution": {"candidate": [np.asarray(c).tolist() for c in cand]}, "diagnostics": d}, rep.passed


def _simulate(args, p, tol):
    start = _start(args, p)
    if args.concept == "open-loop":
        sol = solve_open_loop(p, tol)
        policy, feasible = PolicySpec.gain_sequence(sol.gains), sol.feasible
    else:
        sol = solve_feedback(p, tol)
        policy, feasible = PolicySpec.strategy(sol.Phi), sol.feasible
    noise = NoiseModel()
    steps = p.N - start.t
    if args.samples:
        rng = np.random.default_rng(args.seed)
        mean, se = monte_carlo_cost(p, start.t, start, policy, noise, args.samples, rng, rows="diagonal")
        body = {"solution": {"expected_cost": mean, "standard_error": se, "samples": args.samples},
                "diagnostics": {"method": "monte_carlo", "seed": args.seed}}
        trajs = []
    else:
        if steps > ENUMERATION_CAP:
            raise TilqError(f"{steps} steps exceed the enumeration cap; pass --samples")
        tree = build_tree(p, start.t, start.x, policy, noise, rows="diagonal")
        cost = float(tree_costs(p, start.t, tree)[0])
        trajs = [simulate(p, start, policy, path) for path in enumerate_paths(noise, steps)]
        body = {"solution": {"expected_cost": cost, "paths": len(trajs)},
                "diagnostics": {"method": "enumeration"}}
    report = {"command": "simulate", "feasible": bool(feasible), **body}
    code = EXIT_OK if feasible else EXIT_INFEASIBLE
    if args.format == "csv" and trajs:
        return code, trajectories_to_csv(trajs)
    return code, report


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    t0 = time.perf_counter()
    try:
        code, report = run(args)
    except (TilqError, ValueError) as exc:
        print(f"tilq {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if isinstance(report, dict):
        report["timing_ms"] = round(1000 * (time.perf_counter() - t0), 3) if args.timing else 0.0
        if args.command == "examples" and args.format == "text":
            text = "\n".join(report["diagnostics"]["table"]) + "\n"
        else:
            text = render(jsonable(report), args.format)
    else:
        text = report
    if args.output:
        try:
            Path(args.output).write_text(text)
        except OSError as exc:
            print(f"tilq {args.command}: error: cannot write {args.output}: {exc.strerror}", file=sys.stderr)
            return EXIT_ERROR
    else:
        sys.stdout.write(text)
    log.debug("exit %d", code)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
