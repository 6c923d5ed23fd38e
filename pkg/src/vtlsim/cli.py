"""``vtlsim`` command line.

Exit codes: 0 success, 1 usage, 2 scenario error, 3 simulation timeout.
"""
from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

from .channel import ChannelError, IPG_DISTANCES_FT
from .engine import SimulationTimeout, run
from .harness import compare, format_ipg_csv, ipg_rows
from .scenario import CONTROLLERS, ScenarioError, read_scenario

EXIT_OK, EXIT_USAGE, EXIT_SCENARIO, EXIT_TIMEOUT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _packets(text: str) -> int:
    v = int(text)
    if v < 1000:
        raise argparse.ArgumentTypeError("must be >= 1000")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vtlsim", description="Virtual Traffic Lights simulator")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one scenario and write its report")
    r.add_argument("--scenario", required=True)
    r.add_argument("--controller", choices=CONTROLLERS)
    r.add_argument("--seed", type=_u64)
    r.add_argument("--trace", help="write a per-tick CSV trace here")
    r.add_argument("--out", default="-", help="report path (default stdout)")

    i = sub.add_parser("ipg", help="inter-packet gap sweep over corner distances")
    i.add_argument("--packets", type=_packets, default=2000)
    i.add_argument("--interval-ms", type=_positive, default=100)
    i.add_argument("--seed", type=_u64, required=True)
    i.add_argument("--distance", type=float, action="append", default=[],
                   help="extra distance point in feet (repeatable)")
    i.add_argument("--out", default="-")

    c = sub.add_parser("compare", help="paired stop-sign vs VTL runs over N seeds")
    c.add_argument("--scenario", required=True)
    c.add_argument("--seeds", type=_positive, required=True)
    c.add_argument("--out", default="-")
    return p


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.cmd == "ipg":
            extra = [d for d in args.distance if d not in IPG_DISTANCES_FT]
            distances = sorted(set(IPG_DISTANCES_FT) | set(extra))
            rows = ipg_rows(args.packets, args.interval_ms, args.seed, distances)
            _write(args.out, format_ipg_csv(rows))
            return EXIT_OK

        sc = read_scenario(args.scenario)
        if args.cmd == "run":
            trace = io.StringIO() if args.trace else None
            try:
                report = run(sc, controller=args.controller, seed=args.seed, trace=trace)
            finally:
                if trace is not None:
                    Path(args.trace).write_text(trace.getvalue())
            _write(args.out, report.to_json())
        else:
            seeds = [sc.seed + k for k in range(args.seeds)]
            _write(args.out, compare(sc, seeds).to_json())
        return EXIT_OK
    except ScenarioError as exc:
        print(f"vtlsim: scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except ChannelError as exc:
        print(f"vtlsim: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except SimulationTimeout as exc:
        print(f"vtlsim: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT


if __name__ == "__main__":
    sys.exit(main())
