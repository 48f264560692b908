"""``rtpslab`` command line: echo, ping, model, tables, report-convert.

Exit status: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading
from pathlib import Path
from typing import Sequence

from .config import ConfigError, bench_config, parse_model, read_config
from .errors import LabError
from .lab.harness import run_echo, run_pingpong
from .lab.published import reproduce_tables
from .lab.report import FORMATS, emit_report, histogram_csv, model_dict, read_report_json
from .lab.stats import compute_stats
from .lab.tables import stage_total

log = logging.getLogger("rtpslab")

STAGE_LABELS = ("UDP/IP", "RTPS", "ROS 2")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rtpslab", description="ROS 2 / RTPS ping-pong latency laboratory")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def output_flags(p: argparse.ArgumentParser, default_format: str = "text") -> None:
        p.add_argument("--format", choices=FORMATS, default=None,
                       help=f"report format (default {default_format})")
        p.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")

    def bench_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", metavar="PATH", help="key/value config file; flags override it")
        p.add_argument("--samples", type=int, metavar="N")
        p.add_argument("--warmup", type=int, metavar="N")
        p.add_argument("--padding", type=int, metavar="BYTES")
        p.add_argument("--transport", choices=("udp", "virtual"))
        p.add_argument("--stages", metavar="A,B,C", help="round-trip UDP/IP,RTPS,ROS 2 stage latencies (us)")
        p.add_argument("--clock-mhz", metavar="F")
        p.add_argument("--bind", metavar="ADDR:PORT")
        p.add_argument("--peer", metavar="ADDR:PORT")
        p.add_argument("--timeout", type=float, metavar="SECONDS", help="per-sample timeout")
        p.add_argument("--max-consecutive-timeouts", type=int, metavar="N")
        p.add_argument("--bucket-ns", type=int, metavar="NS", help="histogram bucket width")
        p.add_argument("--seed", type=int)
        p.add_argument("--probe-layers", action="store_const", const="true", default=None,
                       help="time the ROS 2 / RTPS / transport layers separately")
        p.add_argument("--node", metavar="NAME", help="node name")
        p.add_argument("--host-id", metavar="ID", help="own GUID prefix host id (hex, int or dotted quad)")
        p.add_argument("--peer-host-id", metavar="ID", help="peer GUID prefix host id")
        p.add_argument("--ping-topic", metavar="TOPIC")
        p.add_argument("--pong-topic", metavar="TOPIC")
        p.add_argument("--matched-writers", metavar="GUID,...", help="writer GUIDs (32 hex digits) to accept")

    echo = sub.add_parser("echo", help="serve pings until interrupted")
    bench_flags(echo)

    ping = sub.add_parser("ping", help="run the ping-pong initiator and report RTT statistics")
    bench_flags(ping)
    output_flags(ping)
    ping.add_argument("--histogram-csv", metavar="PATH", help="also write the histogram as csv")

    model = sub.add_parser("model", help="evaluate a stage latency model")
    model.add_argument("--stages", default="0.7,2.3,2.0", metavar="A,B,C")
    model.add_argument("--clock-mhz", default="156", metavar="F")
    output_flags(model)

    tables = sub.add_parser("tables", help="recompute the published comparison tables")
    output_flags(tables)

    convert = sub.add_parser("report-convert", help="re-render a saved json report")
    convert.add_argument("input", metavar="REPORT_JSON")
    output_flags(convert)
    return parser


_FLAG_KEYS = {
    "samples": "samples", "warmup": "warmup", "padding": "padding", "transport": "transport",
    "stages": "stages", "clock_mhz": "clock_mhz", "bind": "bind", "peer": "peer",
    "timeout": "timeout", "max_consecutive_timeouts": "max_consecutive_timeouts",
    "bucket_ns": "bucket_ns", "seed": "seed", "probe_layers": "probe_layers",
    "format": "format", "out": "out", "node": "node", "host_id": "host_id",
    "peer_host_id": "peer_host_id", "ping_topic": "ping_topic", "pong_topic": "pong_topic",
    "matched_writers": "matched_writers",
}


def _merged(args: argparse.Namespace) -> dict[str, str]:
    values: dict[str, str] = dict(read_config(args.config)) if getattr(args, "config", None) else {}
    for attr, key in _FLAG_KEYS.items():
        v = getattr(args, attr, None)
        if v is not None:
            values[key] = str(v)
    return values


def _check_combinations(command: str, values: dict[str, str]) -> None:
    transport = values.get("transport", "udp")
    if command == "echo" and transport != "udp":
        raise UsageError("echo only runs over udp")
    if transport == "udp" and ("stages" in values or "clock_mhz" in values):
        raise UsageError("--stages/--clock-mhz only apply to --transport virtual")
    if transport == "virtual" and ("bind" in values or "peer" in values):
        raise UsageError("--bind/--peer only apply to --transport udp")


def _write(data: bytes, out: str | None) -> None:
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _cmd_echo(values: dict[str, str]) -> int:
    config = bench_config(values)
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        stats = run_echo(config, stop)
    except KeyboardInterrupt:
        return 0
    log.info("echo stopped after %d messages (%d malformed)", stats.echoed, stats.malformed)
    return 0


def _cmd_ping(values: dict[str, str], histogram_path: str | None) -> int:
    config = bench_config(values)
    samples = run_pingpong(config)
    if not samples.samples:
        log.error("every sample was dropped (%d)", samples.dropped)
        return 2
    stats = compute_stats(samples.samples, config.bucket_ns)
    _write(emit_report(stats, values.get("format", "text"), samples), values.get("out"))
    if histogram_path:
        Path(histogram_path).write_bytes(histogram_csv(stats))
    return 0


def _cmd_model(args: argparse.Namespace) -> int:
    model = parse_model(args.stages, args.clock_mhz)
    rows = [x.strip() for x in args.stages.split(",")]
    total = stage_total(rows)
    doc = model_dict(list(zip(STAGE_LABELS, [stage_total([r]) for r in rows])), total,
                     model.clock_mhz, model.one_way_ns(), model.stage_cycles())
    _write(emit_report(doc, args.format or "text"), args.out)
    return 0


def _cmd_tables(args: argparse.Namespace) -> int:
    _write(emit_report(reproduce_tables(), args.format or "text"), args.out)
    return 0


def _cmd_convert(args: argparse.Namespace) -> int:
    try:
        doc = read_report_json(Path(args.input).read_bytes())
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise UsageError(f"{args.input}: {exc}") from None
    _write(emit_report(doc, args.format or "text"), args.out)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command in ("echo", "ping"):
            values = _merged(args)
            _check_combinations(args.command, values)
            if args.command == "echo":
                return _cmd_echo(values)
            return _cmd_ping(values, args.histogram_csv)
        if args.command == "model":
            return _cmd_model(args)
        if args.command == "tables":
            return _cmd_tables(args)
        return _cmd_convert(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"rtpslab: error: {exc}", file=sys.stderr)
        return 1
    except (LabError, OSError) as exc:
        print(f"rtpslab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
