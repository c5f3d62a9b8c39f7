"""``fracsource`` command line interface.

Subcommands
-----------
simulate     forward run; writes ``forward.npz`` and ``cauchy_traces.csv``
reduce       reduction pipeline for a linear-motion scenario
reconstruct  spectrum estimation and inversion for an orbit scenario
verify       self-check suite; nonzero exit on any failure
report       every stage of a scenario plus its acceptance flags

Exit codes: 0 success, 1 failed checks, 2 invalid scenario or arguments,
3 a stage raised an error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracsource", description=__doc__.split("\n\n")[0])
    p.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread count")
    p.add_argument("--list-scenarios", action="store_true", help="print bundled scenario names and exit")
    sub = p.add_subparsers(dest="command")

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("scenario", help="scenario YAML path or bundled scenario name")
        sp.add_argument("-o", "--output-dir", type=Path, default=None,
                        help="artifact directory (default: scenario output_dir or runs/<name>)")
        sp.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE",
                        help="override an acceptance tolerance (repeatable)")

    common(sub.add_parser("simulate", help="forward run and Cauchy data"))
    for name, helptext in (("reduce", "reduction and transport inversion"),
                           ("reconstruct", "Fourier-side reconstruction")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--dump", type=Path, default=None, help="use a saved forward.npz instead of simulating")
    common(sub.add_parser("report", help="run all scenario stages and report acceptance flags"))
    sp = sub.add_parser("verify", help="run the self-check suite")
    common(sp, scenario=False)
    sp.add_argument("--coarsen", type=int, default=1, help="divide every check's time resolution")
    sp.add_argument("--flip-boundary-sign", action="store_true",
                    help="mutation canary: flip the flux sign in the duality checks")
    return p


def _overrides(sc, pairs):
    from dataclasses import replace

    from .scenario import DEFAULT_TOLERANCES, ScenarioError

    tol = dict(sc.tolerances)
    for item in pairs:
        key, _, val = item.partition("=")
        if key not in DEFAULT_TOLERANCES:
            raise ScenarioError(f"--tol: unknown tolerance {key!r}; known: {sorted(DEFAULT_TOLERANCES)}")
        try:
            tol[key] = float(val)
        except ValueError:
            raise ScenarioError(f"--tol: {item!r} is not KEY=NUMBER") from None
    return replace(sc, tolerances=tol)


def _print_checks(checks):
    for c in checks:
        flag = "PASS" if c["passed"] else "FAIL"
        print(f"{flag}  {c['name']}: {c['value']:.3e} (< {c['threshold']:g})")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is not None:
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)

    from .io import write_json
    from .pipeline import StageError, run_scenario
    from .scenario import ScenarioError, bundled_scenarios, load_scenario

    if args.list_scenarios:
        for name in sorted(bundled_scenarios()):
            print(name)
        return 0
    if args.command is None:
        _parser().print_help()
        return 2

    if args.command == "verify":
        from .verify import verify_all

        if args.coarsen < 1:
            print("error: --coarsen must be >= 1", file=sys.stderr)
            return 2
        result = verify_all(args.coarsen, args.flip_boundary_sign)
        for c in result["checks"]:
            flag = "PASS" if c["passed"] else "FAIL"
            print(f"{flag}  [{c['group']}] {c['check']}: {c['value']:.3e} {c['relation']} {c['threshold']:g}"
                  f"  (margin {c['margin']:.3g})")
        n_fail = sum(not c["passed"] for c in result["checks"])
        print(f"{len(result['checks']) - n_fail}/{len(result['checks'])} checks passed")
        if args.output_dir is not None:
            write_json(args.output_dir / "verify.json", result)
        return 0 if result["passed"] else 1

    try:
        sc = _overrides(load_scenario(args.scenario), args.tol)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2
    out = args.output_dir or Path(sc.output_dir or Path("runs") / sc.name)
    stages = {"simulate": ("simulate",), "reduce": ("simulate", "reduce"),
              "reconstruct": ("simulate", "reconstruct"), "report": sc.stages}[args.command]
    dump = getattr(args, "dump", None)
    try:
        report = run_scenario(sc, out, stages, dump=dump)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    checks = [dict(name=k, **v) for k, v in report.checks.items()]
    _print_checks(checks)
    print(f"artifacts written to {out}")
    return 0 if report.passed else 1
