"""Command-line entry point.

Exit codes:

    0  success
    1  a check suite failed (or an unexpected error)
    2  invalid configuration
    3  fixed-point iteration did not converge
    4  linear solver failure
    5  mass conservation violated
    6  output could not be written
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
import warnings

from .checks import FAULTS, SUITES, run_checks
from .config import parse_config
from .driver import run_simulation
from .errors import ConfigError, ConservationViolation, NonConvergence, SolverFailure
from .io import write_outputs

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_SOLVER = 4
EXIT_CONSERVATION = 5
EXIT_IO = 6


def _warn_to_stderr(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = cfg.output
    out_dir = args.out_dir or out.out_dir
    try:
        result = run_simulation(cfg.params, steps=args.steps, snapshot_every=out.snapshot_every,
                                store_full_psi=out.store_full_psi)
    except NonConvergence as exc:
        hist = ", ".join(f"{h:.2e}" for h in exc.history[-5:])
        print(f"step {exc.step}: {exc} [last changes: {hist}]", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConservationViolation as exc:
        print(f"conservation violation: {exc}", file=sys.stderr)
        return EXIT_CONSERVATION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        write_outputs(result.ledger, result.snapshots, out_dir, cfg.params, result.disc.grid,
                      extra={"steps_run": len(result.ledger) - 1})
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    last = result.ledger[-1]
    print(f"{last['step']} steps, t = {last['t']:g}, total energy {last['total_energy']:.10g}, "
          f"mass {last['mass']:.15g}; outputs in {out_dir}")
    return EXIT_OK


def cmd_check(args) -> int:
    names = None
    if args.filter:
        names = [n for n in SUITES if args.filter in n]
        if not names:
            print(f"no suite matches {args.filter!r}; available: {', '.join(SUITES)}", file=sys.stderr)
            return EXIT_CHECK
    faults = tuple(args.inject_fault or ())
    t0 = time.perf_counter()
    results = run_checks(names, faults, stream=sys.stdout if args.verbose else None)
    print(f"{'suite':<16}{'result':<8}{'time [s]':>9}")
    for name, (ok, items, secs) in results.items():
        print(f"{name:<16}{'pass' if ok else 'FAIL':<8}{secs:>9.2f}")
        if not ok:
            for prop, pok, detail in items:
                if not pok:
                    print(f"    failed: {prop}: {detail}")
    failed = [n for n, (ok, _, _) in results.items() if not ok]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed in {time.perf_counter() - t0:.1f} s")
    if failed:
        print(f"failing suites: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="activedoi", description="Active Doi model solver")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a simulation from a config file")
    r.add_argument("config")
    r.add_argument("--out-dir", default=None, help="override [output] out_dir")
    r.add_argument("--steps", type=int, default=None, help="number of steps (default T / tau)")
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("check", help="run the property suites")
    c.add_argument("--filter", default=None, help="only suites whose name contains this string")
    c.add_argument("--inject-fault", action="append", choices=FAULTS, help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings():
        warnings.showwarning = _warn_to_stderr
        try:
            return args.func(args)
        except KeyboardInterrupt:
            return 130
        except Exception as exc:  # keep the exit code contract for unexpected failures
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
