"""Command-line entry point.

Exit status: 0 when every check passes, 1 when a check fails, 2 for an
invalid scenario file or arguments.
"""

from __future__ import annotations

import argparse
import sys

from .expr import ExprError
from .model import ScenarioError
from .report import emit_report
from .runner import COMMANDS, run_scenario
from .scenario import ValidationError, load_scenario

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2

HELP = {
    "construct": "build the model and tabulate potential, partner function and ground state",
    "verify": "run the checks listed in the scenario file",
    "transform": "build the coordinate map and run the transform checks",
    "spectrum": "Dirichlet spectrum of the Hamiltonian",
    "convergence": "estimate convergence orders over the grid refinement list",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pseudoherm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, help=HELP[cmd])
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", help="output directory (JSON goes to stdout when omitted)")
        p.add_argument("--format", choices=("json", "csv"), default=None,
                       help="report format (default: the file's output.format, else json)")
        p.add_argument("--no-timings", action="store_true",
                       help="omit wall-clock times so identical inputs give identical reports")
    return parser


def _summary_lines(report) -> list[str]:
    lines = []
    for c in report.checks:
        parts = [f"{cr['label']}={cr['value']:.3e}" for cr in c.criteria]
        lines.append(f"{c.status.upper():10s} {c.name:16s} {' '.join(parts)}")
    lines.append(f"{report.summary()['status'].upper()}: {report.scenario.name} ({report.command})")
    return lines


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sf = load_scenario(args.scenario)
        fmt = args.format or sf.output.get("format", "json")
        if fmt not in ("json", "csv"):
            raise ValidationError(f"output.format must be 'json' or 'csv', got {fmt!r}")
        out = args.out or sf.output.get("dir")
        if fmt == "csv" and out is None:
            raise ValidationError("CSV output needs --out or output.dir")
        report = run_scenario(sf, args.command)
    except (ValidationError, ScenarioError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        paths = emit_report(report, out, fmt, timings=not args.no_timings)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for line in _summary_lines(report):
        print(line, file=sys.stderr)
    for p in paths:
        print(f"wrote {p}", file=sys.stderr)
    return EXIT_CHECK_FAILED if report.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
