"""Command-line interface.

Usage patterns::

    simbus label-tests --tests scenarios/ --canbus --can-dbc db.dbc \\
        --can-dbc-map map.json --can-interface udp --can-channel 127.0.0.1:9000
    simbus label-tests -c config.yml
    simbus -c config.yml                 # command taken from the file
    simbus monitor --channel udp:0.0.0.0:9000 --dbc db.dbc \\
        --expect sampleFrame2.wheelspeed:0:13107:50 --timeout 3

Exit codes: 0 success / all scenarios pass, 1 at least one scenario or
expectation failed, 2 configuration or I/O error (nothing was labeled).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .dbc import load_dbc
from .errors import SimbusError
from .monitor import check_expectations, parse_expectation, run_monitor
from .runner import load_config, run_label_tests


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simbus",
        description="Generate CAN traffic from simulated driving scenarios "
                    "and label regression tests.",
    )
    parser.add_argument("-c", "--config", metavar="FILE",
                        help="YAML configuration file (command + options)")
    sub = parser.add_subparsers(dest="command")

    lt = sub.add_parser("label-tests", help="run every scenario, emit CAN traffic, label pass/fail")
    lt.add_argument("-c", "--config", metavar="FILE", help="YAML configuration file")
    lt.add_argument("--tests", metavar="DIR", help="directory of scenario files")
    lt.add_argument("--rf", type=float, help="risk factor (cornering aggressiveness)")
    lt.add_argument("--oob", type=float, help="out-of-bound tolerance fraction [0..1]")
    lt.add_argument("--max-speed", type=float, dest="max_speed", help="speed limit in km/h")
    lt.add_argument("--interrupt", action=argparse.BooleanOptionalAction, default=None,
                    help="stop a scenario at its first violation")
    lt.add_argument("--canbus", action=argparse.BooleanOptionalAction, default=None,
                    help="enable CAN frame generation")
    lt.add_argument("--can-stdout", action=argparse.BooleanOptionalAction, default=None,
                    dest="can_stdout", help="print frames to stdout")
    lt.add_argument("--can-dbc", dest="can_dbc", metavar="FILE", help="CAN database file")
    lt.add_argument("--can-dbc-map", dest="can_dbc_map", metavar="FILE",
                    help="channel-to-signal map file")
    lt.add_argument("--can-interface", dest="can_interface",
                    help="channel scheme: inproc, udp, or socketcan")
    lt.add_argument("--can-channel", dest="can_channel",
                    help="channel name (vcan0, host:port, queue name)")
    lt.add_argument("--can-bitrate", dest="can_bitrate", type=int, help="bus bitrate in bit/s")
    lt.add_argument("--influxdb-bucket", dest="influxdb_bucket", help="time-series bucket")
    lt.add_argument("--influxdb-org", dest="influxdb_org", help="time-series organization")
    lt.add_argument("--report", metavar="FILE", help="results CSV path (default results.csv)")
    lt.add_argument("--plots", action=argparse.BooleanOptionalAction, default=None,
                    help="render figures next to the report")
    lt.add_argument("--plots-dir", dest="plots_dir", metavar="DIR", help="figure output directory")
    lt.add_argument("--parallel", action=argparse.BooleanOptionalAction, default=None,
                    help="label scenarios concurrently (sink-free runs only)")

    mon = sub.add_parser("monitor", help="receive, decode, and print CAN traffic")
    mon.add_argument("--channel", required=True,
                     help="channel descriptor, e.g. udp:0.0.0.0:9000")
    mon.add_argument("--dbc", required=True, metavar="FILE", help="CAN database file")
    mon.add_argument("--expect", action="append", default=[], metavar="M.S:MIN:MAX:COUNT",
                     help="require COUNT in-range observations of message.signal")
    mon.add_argument("--timeout", type=float, default=5.0,
                     help="stop after this many idle seconds (default 5)")
    mon.add_argument("--max-frames", dest="max_frames", type=int,
                     help="stop after this many frames")
    return parser


_LABEL_TEST_KEYS = (
    "tests", "rf", "oob", "max_speed", "interrupt", "canbus", "can_stdout",
    "can_dbc", "can_dbc_map", "can_interface", "can_channel", "can_bitrate",
    "influxdb_bucket", "influxdb_org", "report", "plots", "plots_dir", "parallel",
)


def _cmd_label_tests(args) -> int:
    overrides = {key: getattr(args, key, None) for key in _LABEL_TEST_KEYS}
    config = load_config(args.config, overrides)
    report = run_label_tests(config)
    return report.exit_code


def _cmd_monitor(args) -> int:
    expectations = [parse_expectation(text) for text in args.expect]
    db = load_dbc(args.dbc)
    report = run_monitor(
        args.channel, db,
        timeout=args.timeout,
        expectations=expectations,
        max_frames=args.max_frames,
    )
    if report.no_traffic:
        sys.stderr.write("monitor: no traffic received\n")
        return 2
    if expectations:
        ok, counts = check_expectations(expectations, report.observations)
        for exp, count in zip(expectations, counts):
            status = "ok" if count >= exp.min_count else "FAILED"
            sys.stderr.write(
                f"expect {exp.message}.{exp.signal} in [{exp.lo}, {exp.hi}]: "
                f"{count}/{exp.min_count} {status}\n"
            )
        return 0 if ok else 1
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command is None:
            if not args.config:
                parser.print_help(sys.stderr)
                return 2
            config = load_config(args.config)
            if config.command != "label-tests":
                raise SimbusError(f"config file requests unknown command {config.command!r}")
            return run_label_tests(config).exit_code
        if args.command == "label-tests":
            return _cmd_label_tests(args)
        if args.command == "monitor":
            return _cmd_monitor(args)
        parser.print_help(sys.stderr)
        return 2
    except SimbusError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
