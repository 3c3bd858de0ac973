"""Command-line entry point.

    emblemsim run SCENARIO [--seed N] [--ticks N] [--report table|structured]
                           [--serve ADDR] [--log-dir PATH]

Exit codes: 0 clean run, 2 scenario validation errors, 3 safety-invariant
violation (the offending decision log is printed).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .metrics import render_structured, render_table
from .runner import run
from .scenario import ScenarioError, load_scenario
from .server import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emblemsim")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run a scenario file")
    runp.add_argument("scenario", type=Path)
    runp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    runp.add_argument("--ticks", type=int, default=None, help="cap the number of ticks")
    runp.add_argument("--report", choices=("table", "structured"), default="table")
    runp.add_argument("--serve", metavar="ADDR", default=None,
                      help="host:port for the live operator console (hitl mode console)")
    runp.add_argument("--log-dir", type=Path, default=None,
                      help="write decision logs and the report here")
    runp.add_argument("--pace", type=float, default=1.0,
                      help="sim seconds per wall second when serving (default 1.0)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario.read_text())
    except ScenarioError as exc:
        print("scenario validation failed:", file=sys.stderr)
        for error in exc.errors:
            print(f"  - {error}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return 2

    if args.serve:
        if scenario.hitl.mode != "console":
            print("--serve requires a scenario with hitl mode 'console'", file=sys.stderr)
            return 2
        result = serve(scenario, args.serve, seed_override=args.seed, pace_factor=args.pace)
    else:
        result = run(scenario, seed_override=args.seed, max_ticks=args.ticks)

    rendered = (
        render_table(result.metrics)
        if args.report == "table"
        else render_structured(result.metrics)
    )
    sys.stdout.write(rendered)

    if args.log_dir:
        args.log_dir.mkdir(parents=True, exist_ok=True)
        (args.log_dir / "decisions.log").write_text(
            "\n".join(result.log_lines) + ("\n" if result.log_lines else "")
        )
        (args.log_dir / "report.json").write_text(render_structured(result.metrics))
        (args.log_dir / "report.txt").write_text(render_table(result.metrics))

    if result.safety_violations:
        print("SAFETY INVARIANT VIOLATION:", file=sys.stderr)
        for violation in result.safety_violations:
            print(f"  - {violation}", file=sys.stderr)
        print("offending decision log:", file=sys.stderr)
        for line in result.log_lines:
            print(f"  {line}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
