"""Command-line front end.

Exit codes: 0 success or threshold met, 1 plan below threshold (or no plan),
2 input error, 3 repair budget exhausted.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .beliefnet import export_dot
from .errors import EventPlanError, LocatedError, NoPlanFound
from .failures import analyze_plan
from .montecarlo import THREADS_ENV, convergence_series, default_threads, run_trials, simulate_once
from .parser import (
    dumps,
    literal_to_json,
    parse_domain,
    parse_plan,
    parse_problem,
    plan_to_json,
    serialize_plan,
    validate,
)
from .planner import PlannerLimits, plan as make_plan
from .repair import BUDGET_EXHAUSTED, THRESHOLD_MET, solve

EXIT_OK, EXIT_BELOW, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror or exc})") from exc


def _located(path: str, exc: Exception) -> str:
    if isinstance(exc, LocatedError) and exc.line is not None:
        return f"{path}:{exc.line}:{exc.col}: {exc.message}"
    return f"{path}: {exc}"


def _load(args, need_valid: bool = True):
    dtext, ptext = _read(args.domain), _read(args.problem)
    try:
        domain = parse_domain(dtext)
    except EventPlanError as exc:
        raise InputError(_located(args.domain, exc)) from exc
    try:
        problem = parse_problem(ptext)
    except EventPlanError as exc:
        raise InputError(_located(args.problem, exc)) from exc
    diags = validate(domain, problem)
    if diags and need_valid:
        raise InputError("\n".join(f"{args.problem}:{d}" for d in diags))
    return domain, problem, diags


def _load_plan(args, domain, problem):
    if getattr(args, "plan", None):
        text = _read(args.plan)
        try:
            return parse_plan(text, domain, problem)
        except EventPlanError as exc:
            raise InputError(_located(args.plan, exc)) from exc
    return make_plan(domain, problem, _limits(args))


def _limits(args):
    return PlannerLimits(max_length=args.max_length)


def _write(path: str | None, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    _, _, diags = _load(args, need_valid=False)
    for d in diags:
        print(f"{args.problem}:{d}")
    if diags:
        return EXIT_INPUT
    print("ok")
    return EXIT_OK


def cmd_plan(args) -> int:
    domain, problem, _ = _load(args)
    try:
        p = make_plan(domain, problem, _limits(args))
    except NoPlanFound as exc:
        print(f"no plan: {exc}", file=sys.stderr)
        return EXIT_BELOW
    _write(args.output, serialize_plan(p))
    return EXIT_OK


def _mode_json(m):
    return {
        "step": None if m.step is None else str(m.step),
        "literal": literal_to_json(m.literal),
        "terminal": str(m.terminal),
        "chain": [str(e) for e in m.chain],
        "interval": list(m.interval),
        "probability": m.probability,
        "path_mass": m.path_mass,
        "path": m.path_index,
    }


def cmd_analyze(args) -> int:
    domain, problem, _ = _load(args)
    p = _load_plan(args, domain, problem)
    result = analyze_plan(p, domain, problem, args.max_chain)
    if args.dot:
        if len(result.nets) == 1:
            _write(args.dot, export_dot(result.nets[0]))
        else:
            base = Path(args.dot)
            for i, net in enumerate(result.nets):
                _write(str(base.with_name(f"{base.stem}-path{i}{base.suffix}")), export_dot(net))
    if args.json:
        doc = {
            "success": result.success,
            "threshold": args.threshold,
            "plan": plan_to_json(p),
            "paths": [net.summary() for net in result.nets],
            "failures": [_mode_json(m) for m in result.failures],
            "outcomes": [{"outcome": str(o), "probability": pr} for o, pr in result.outcomes],
        }
        print(dumps(doc))
    else:
        print(f"success probability: {result.success:.10g}")
        print(f"failure modes: {len(result.failures)}")
        for i, m in enumerate(result.failures, 1):
            print(f"  {i}. {m.describe()}")
    return EXIT_OK if result.success >= args.threshold else EXIT_BELOW


def cmd_simulate(args) -> int:
    domain, problem, _ = _load(args)
    p = _load_plan(args, domain, problem)
    threads = args.threads or default_threads()
    if args.trace:
        for k in range(args.trace):
            trace = simulate_once(p, problem, domain, args.seed, k)
            print(f"; trial {k}")
            sys.stdout.write(trace.text())
    stats = run_trials(p, problem, domain, args.trials, args.seed, threads)
    if args.csv:
        stride = args.stride or max(1, args.trials // 100)
        series = convergence_series(p, problem, domain, args.trials, stride, args.seed, threads)
        _write(args.csv, series.to_csv())
    if args.json:
        print(dumps(stats.to_dict()))
    else:
        r = stats.success_rate
        print(f"trials: {stats.trials}")
        print(f"success: {r:.6f} +/- {stats.stderr(r):.6f}")
        for key, rate in stats.failure_rates.items():
            print(f"  {rate:.6f} +/- {stats.stderr(rate):.6f}  {key}")
    return EXIT_OK


def cmd_solve(args) -> int:
    domain, problem, _ = _load(args)
    try:
        report = solve(domain, problem, args.threshold, args.budget, args.max_chain, _limits(args))
    except NoPlanFound as exc:
        print(f"no plan: {exc}", file=sys.stderr)
        return EXIT_BELOW
    if args.output:
        _write(args.output, serialize_plan(report.plan))
    if args.report:
        _write(args.report, dumps(report.to_json()) + "\n")
    if args.json:
        print(dumps(report.to_json()))
    else:
        for a in report.log:
            verdict = "accepted" if a.accepted else "rejected"
            after = "-" if a.after is None else f"{a.after:.10g}"
            print(f"[{a.iteration}] {a.method} {verdict}: {a.before:.10g} -> {after}")
            print(f"    {a.failure}")
            if a.detail:
                print(f"    {a.detail}")
        print(f"termination: {report.reason}")
        print(f"success probability: {report.probability:.10g}")
        if not args.output:
            sys.stdout.write(serialize_plan(report.plan))
    if report.reason == THRESHOLD_MET:
        return EXIT_OK
    return EXIT_BUDGET if report.reason == BUDGET_EXHAUSTED else EXIT_BELOW


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eventplan",
                                 description="Plan, analyse and repair plans under random external events.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("domain", help="domain file (.evd)")
        p.add_argument("problem", help="problem file (.evp)")
        p.add_argument("--max-length", type=int, default=20, help="planner length bound (default 20)")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default ${THREADS_ENV} or 1)")
        return p

    p = common(sub.add_parser("validate", help="check a domain and problem"))
    p.set_defaults(func=cmd_validate)

    p = common(sub.add_parser("plan", help="find an event-free plan"))
    p.add_argument("-o", "--output", help="write the plan here (default stdout)")
    p.set_defaults(func=cmd_plan)

    p = common(sub.add_parser("analyze", help="exact success probability and failure modes"))
    p.add_argument("--plan", help="plan file (default: plan from scratch)")
    p.add_argument("--max-chain", type=int, default=3, help="event augmentation rounds (default 3)")
    p.add_argument("--threshold", type=float, default=0.9, help="exit 1 below this (default 0.9)")
    p.add_argument("--dot", help="write the belief net as Graphviz text")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_analyze)

    p = common(sub.add_parser("simulate", help="Monte Carlo execution"))
    p.add_argument("--plan", help="plan file (default: plan from scratch)")
    p.add_argument("--trials", type=int, default=10000, help="number of trials (default 10000)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--trace", type=int, nargs="?", const=1, default=0, metavar="K",
                   help="print traces of the first K trials (default 1)")
    p.add_argument("--csv", help="write convergence rows here")
    p.add_argument("--stride", type=int, default=None, help="trials per convergence row")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("solve", help="plan and repair until the threshold is met"))
    p.add_argument("--threshold", type=float, default=0.9, help="target success probability (default 0.9)")
    p.add_argument("--budget", type=int, default=20, help="maximum repair attempts (default 20)")
    p.add_argument("--max-chain", type=int, default=3, help="event augmentation rounds (default 3)")
    p.add_argument("-o", "--output", help="write the final plan here")
    p.add_argument("--report", help="write the JSON repair report here")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_solve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT
    except EventPlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
