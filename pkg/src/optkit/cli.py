"""Command-line front end: run solvers, check derivatives, benchmark, inspect records.

Exit codes: 0 success/converged, 1 ran-but-failed, 2 usage/config error.
"""

import argparse
import os
import sys

import numpy as np

from .bench import (REGISTRY, data_profile, make_problem, parse_problem_token,
                    performance_profile, problem_names, run_suite, write_suite_csv)
from .problem import (EvaluationError, ProblemError, ScaledView,
                      check_first_derivatives)
from .recording import (HotStartError, RecordError, print_results,
                        read_record, write_readable_outputs, write_record)
from .solvers import SOLVERS, OptionError, SolverError

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class CliError(Exception):
    """Configuration problem; maps to exit code 2."""


def _parse_override(token):
    """Parse a key=value solver option override with permissive value typing."""
    key, sep, raw = token.partition("=")
    if not sep or not key:
        raise CliError(f"option override must look like key=value, got {token!r}")
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return key, low == "true"
    try:
        return key, int(raw)
    except ValueError:
        pass
    try:
        return key, float(raw)
    except ValueError:
        pass
    if "," in raw:
        return key, [float(v) for v in raw.split(",") if v.strip()]
    return key, raw


def _csv_floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _build_problem(args):
    name = args.problem
    if name is None:
        raise CliError("--problem is required")
    if name not in REGISTRY:
        raise CliError(f"unknown problem {name!r}; valid names: {problem_names()}")
    entry = REGISTRY[name]
    size = None
    if entry.size_param == "n":
        size = args.n
    elif entry.size_param == "n_el":
        size = args.n_el
    elif entry.size_param == "n_t":
        size = args.n_t
    spec = make_problem(name, size)
    # optional scaler overrides rebuild the spec with new scaling
    if args.x_scaler or args.f_scaler or args.c_scaler:
        from dataclasses import replace
        kwargs = {}
        if args.x_scaler:
            xs = _csv_floats(args.x_scaler)
            kwargs["x_scaler"] = np.full(spec.n, xs[0]) if len(xs) == 1 else np.asarray(xs)
        if args.f_scaler:
            kwargs["f_scaler"] = float(args.f_scaler)
        if args.c_scaler:
            cs = _csv_floats(args.c_scaler)
            kwargs["c_scaler"] = np.full(spec.m, cs[0]) if len(cs) == 1 else np.asarray(cs)
        try:
            spec = replace(spec, **{k: np.asarray(v, dtype=float) if k != "f_scaler" else v
                                    for k, v in kwargs.items()})
        except ValueError as exc:
            raise CliError(f"bad scaler override: {exc}") from exc
    return spec


def _solver_options(args):
    options = {}
    for token in args.opt or []:
        key, value = _parse_override(token)
        options[key] = value
    if args.maxiter is not None:
        options["maxiter"] = args.maxiter
    if args.opt_tol is not None:
        options["opt_tol"] = args.opt_tol
    if args.feas_tol is not None:
        options["feas_tol"] = args.feas_tol
    if args.seed is not None:
        options["seed"] = args.seed
    return options


def cmd_run(args):
    spec = _build_problem(args)
    if args.solver not in SOLVERS:
        raise CliError(f"unknown solver {args.solver!r}; valid names: {sorted(SOLVERS)}")
    solver = SOLVERS[args.solver]
    options = _solver_options(args)

    hot = None
    if args.hot_start:
        try:
            hot = read_record(args.hot_start)
        except (OSError, RecordError) as exc:
            raise CliError(f"cannot hot-start: {exc}") from exc
    recording = bool(args.record or args.readable_outputs)
    try:
        view = ScaledView(spec, record=True if recording else None, hot_start=hot)
    except HotStartError as exc:
        raise CliError(str(exc)) from exc

    try:
        report = solver(view, **options)
    except OptionError as exc:
        raise CliError(str(exc)) from exc
    except (SolverError, EvaluationError) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_FAILED

    print(print_results(report))
    if args.record:
        write_record(view.record, args.record)
        print(f"record written to {args.record}")
    if args.readable_outputs:
        names = [n.strip() for n in args.readable_outputs.split(",") if n.strip()]
        paths = write_readable_outputs(view.record, names, args.out_dir)
        print("readable outputs: " + " ".join(paths))
    return EXIT_OK if report.converged else EXIT_FAILED


def cmd_check(args):
    spec = _build_problem(args)
    try:
        report = check_first_derivatives(spec)
    except ProblemError as exc:
        raise CliError(str(exc)) from exc
    print(f"problem: {spec.name}")
    print(report)
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_bench(args):
    problems = [t.strip() for t in (args.problems or "").split(",") if t.strip()]
    solvers = [t.strip() for t in (args.solvers or "").split(",") if t.strip()]
    if not problems or not solvers:
        raise CliError("bench needs nonempty --problems and --solvers selections")
    try:
        specs = [parse_problem_token(t) for t in problems]
    except (KeyError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    for s in solvers:
        if s not in SOLVERS:
            raise CliError(f"unknown solver {s!r}; valid names: {sorted(SOLVERS)}")

    options = {}
    for token in args.opt or []:
        key, value = _parse_override(token)
        for s in solvers:
            options.setdefault(s, {})[key] = value
    budget = (args.maxiter, args.budget_seconds)
    table = run_suite(specs, solvers, options=options, budget=budget)

    os.makedirs(args.out_dir, exist_ok=True)
    summary = os.path.join(args.out_dir, "suite_summary.csv")
    write_suite_csv(table, summary)
    written = [summary]
    if args.profile in ("perf", "both"):
        path = os.path.join(args.out_dir, "performance_profile.csv")
        performance_profile(table).write_csv(path)
        written.append(path)
    if args.profile in ("data", "both"):
        path = os.path.join(args.out_dir, "data_profile.csv")
        data_profile(table).write_csv(path)
        written.append(path)

    print(f"{'solver':<22} solved fraction")
    for i, solver in enumerate(table.solvers):
        frac = float(np.mean(table.solved[i]))
        print(f"{solver:<22} {frac:.3f}  ({int(table.solved[i].sum())}/{len(table.problems)})")
    print("wrote: " + " ".join(written))
    return EXIT_OK


def cmd_inspect(args):
    try:
        record = read_record(args.record_path)
    except OSError as exc:
        raise CliError(f"cannot read record: {exc}") from exc
    except RecordError as exc:
        print(f"malformed record: {exc}", file=sys.stderr)
        return EXIT_FAILED

    header = record.header
    evals = record.eval_events()
    iters = record.iter_events()
    print(f"problem:   {header.get('problem')}")
    print(f"solver:    {header.get('solver')}")
    print(f"n, m:      {header.get('n')}, {header.get('m')}")
    print(f"timestamp: {header.get('timestamp')}")
    print(f"{len(iters)} iterations, {len(evals)} evaluations")

    if args.tail:
        for event in iters[-args.tail:]:
            parts = []
            for name, value in event.values.items():
                if isinstance(value, float):
                    parts.append(f"{name}={value:.6g}")
                elif isinstance(value, np.ndarray):
                    with np.printoptions(precision=6, threshold=8):
                        parts.append(f"{name}={value}")
                else:
                    parts.append(f"{name}={value}")
            print("  " + " ".join(parts))
    if args.outputs:
        names = [n.strip() for n in args.outputs.split(",") if n.strip()]
        try:
            paths = write_readable_outputs(record, names, args.out_dir)
        except RecordError as exc:
            raise CliError(str(exc)) from exc
        print("readable outputs: " + " ".join(paths))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="optkit",
                                     description="run, check, and benchmark the built-in optimizers")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--maxiter", type=int, default=None)
        p.add_argument("--opt-tol", dest="opt_tol", type=float, default=None)
        p.add_argument("--feas-tol", dest="feas_tol", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--opt", action="append", metavar="KEY=VALUE",
                       help="solver option override (repeatable)")
        p.add_argument("--out-dir", dest="out_dir", default=".")

    def add_problem(p):
        p.add_argument("--problem", help=f"one of {problem_names()}")
        p.add_argument("--n", type=int, default=None, help="size for scalable problems")
        p.add_argument("--n-el", dest="n_el", type=int, default=None, help="beam element count")
        p.add_argument("--n-t", dest="n_t", type=int, default=None, help="trajectory timesteps")
        p.add_argument("--x-scaler", dest="x_scaler", default=None, help="comma floats or one float")
        p.add_argument("--f-scaler", dest="f_scaler", type=float, default=None)
        p.add_argument("--c-scaler", dest="c_scaler", default=None, help="comma floats or one float")

    run_p = sub.add_parser("run", help="solve a registry problem")
    add_problem(run_p)
    run_p.add_argument("--solver", required=True)
    run_p.add_argument("--record", default=None, help="write the run record here")
    run_p.add_argument("--hot-start", dest="hot_start", default=None,
                       help="replay evaluations from this record")
    run_p.add_argument("--readable-outputs", dest="readable_outputs", default=None,
                       help="comma-separated output names to export as text")
    add_common(run_p)
    run_p.set_defaults(func=cmd_run)

    check_p = sub.add_parser("check", help="verify analytic derivatives against finite differences")
    add_problem(check_p)
    add_common(check_p)
    check_p.set_defaults(func=cmd_check)

    bench_p = sub.add_parser("bench", help="run a solver x problem suite and export profiles")
    bench_p.add_argument("--problems", help="comma-separated names, size via name:size")
    bench_p.add_argument("--solvers", help="comma-separated solver names")
    bench_p.add_argument("--profile", choices=["perf", "data", "both"], default="both")
    bench_p.add_argument("--budget-seconds", dest="budget_seconds", type=float, default=None)
    add_common(bench_p)
    bench_p.set_defaults(func=cmd_bench)

    inspect_p = sub.add_parser("inspect", help="summarize a record file")
    inspect_p.add_argument("record_path")
    inspect_p.add_argument("--tail", type=int, default=0, help="print the last K iteration rows")
    inspect_p.add_argument("--outputs", default=None, help="export these outputs as text files")
    inspect_p.add_argument("--out-dir", dest="out_dir", default=".")
    inspect_p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OptionError, ProblemError, HotStartError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
