"""``streamflow`` command line.

Exit codes: 0 ok, 1 I/O or parse error, 2 validation error or unknown
entity, 3 an execution entry failed, 64 usage error.
"""
from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading

from .channels import open_channels
from .dsl import data_root, load_definition, load_registry
from .errors import (
    DefinitionSyntaxError,
    InvalidName,
    InvalidWorkflow,
    SchemaViolation,
    StreamflowError,
    TimestampError,
    UnknownChannel,
    UnknownStream,
    UnsupportedSchemaVersion,
)
from .stream import StreamId
from .timeline import TimeInterval, TimeIntervalSet, format_timestamp, parse_duration
from .workflow import validate

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_FAILED, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _err(msg):
    print(msg, file=sys.stderr)


def _load(path, registry):
    """Load a definition, mapping failures to (None, exit code)."""
    try:
        return load_definition(path, registry), None
    except OSError as exc:
        _err(f"{path}: {exc.strerror or exc}")
        return None, EXIT_IO
    except DefinitionSyntaxError as exc:
        _err(str(exc))
        return None, EXIT_IO
    except (SchemaViolation, UnsupportedSchemaVersion) as exc:
        _err(f"{path}: {type(exc).__name__}: {exc}")
        return None, EXIT_INVALID
    except StreamflowError as exc:
        _err(f"{path}: {type(exc).__name__}: {exc}")
        return None, EXIT_INVALID


def cmd_validate(args) -> int:
    definition, code = _load(args.path, load_registry(args.home))
    if definition is None:
        return code
    violations = validate(definition.workflow)
    if violations:
        for v in violations:
            print(v)
        return EXIT_INVALID
    print("OK")
    return EXIT_OK


def _interval_override(args):
    if args.start is None and args.end is None:
        return None
    if args.start is None or args.end is None:
        raise UsageError("--start and --end must be given together")
    try:
        interval = TimeInterval.parse(args.start, args.end)
    except (TimestampError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return TimeIntervalSet([interval])


def print_report(report) -> None:
    for e in report.entries:
        marked = ",".join(str(iv) for iv in e.intervals_marked) or "-"
        line = f"{e.outcome:20s} {e.factor_id:20s} {e.sink:40s} written={e.instances_written} marked={marked}"
        if e.error:
            line += f" error={e.error}"
        print(line)
    print(report.summary())


def cmd_run(args) -> int:
    try:
        requested = _interval_override(args)
    except UsageError as exc:
        _err(f"usage error: {exc}")
        return EXIT_USAGE
    registry = load_registry(args.home)
    definition, code = _load(args.path, registry)
    if definition is None:
        return code
    try:
        engine = definition.engine(args.home, registry, parallel=args.parallel)
    except (StreamflowError, OSError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID if isinstance(exc, StreamflowError) else EXIT_IO
    try:
        report = engine.run(definition.workflow, requested)
    except InvalidWorkflow as exc:
        for v in exc.violations:
            print(v)
        return EXIT_INVALID
    except StreamflowError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID
    finally:
        engine.channels.close()
    print_report(report)
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_serve(args) -> int:
    try:
        poll = parse_duration(args.poll)
        lag = parse_duration(args.lag)
    except ValueError as exc:
        _err(f"usage error: {exc}")
        return EXIT_USAGE
    if poll <= 0:
        _err("usage error: --poll must be positive")
        return EXIT_USAGE
    registry = load_registry(args.home)
    definitions = []
    for path in args.paths:
        definition, code = _load(path, registry)
        if definition is None:
            return code
        if definition.workflow.mode != "online":
            _err(f"{path}: workflow {definition.workflow.workflow_id} is offline_only")
            return EXIT_INVALID
        definitions.append(definition)

    logging.basicConfig(level=getattr(logging, args.log_level.upper()), format="%(message)s", stream=sys.stderr)
    stop = threading.Event()

    def on_signal(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, on_signal)
    signal.signal(signal.SIGTERM, on_signal)

    engines, threads, errors = [], [], []
    try:
        for definition in definitions:
            engine = definition.engine(args.home, registry)
            engines.append(engine)

            def target(engine=engine, wf=definition.workflow):
                try:
                    engine.run_online([wf], poll_period=poll, watermark_lag=lag, stop=stop)
                except Exception as exc:  # surfaced as exit status
                    errors.append(exc)
                    stop.set()

            threads.append(threading.Thread(target=target, name=definition.workflow.workflow_id))
    except (StreamflowError, OSError) as exc:
        _err(str(exc))
        return EXIT_INVALID
    for t in threads:
        t.start()
    while any(t.is_alive() for t in threads):
        stop.wait(0.05)
    for t in threads:
        t.join()
    for engine in engines:
        engine.channels.close()
    for exc in errors:
        _err(f"{type(exc).__name__}: {exc}")
    return EXIT_FAILED if errors else EXIT_OK


def _stream_channels(args):
    registry = load_registry(args.home)
    if args.definition:
        definition, code = _load(args.definition, registry)
        if definition is None:
            return None, code
        channels = definition.open_channels(args.home, registry)
    else:
        channels = open_channels(None, data_root(args.home), registry)
    return channels, None


def _span(ledger) -> str:
    if not ledger:
        return "-"
    return f"({format_timestamp(ledger.start)}, {format_timestamp(ledger.end)}]"


def cmd_streams(args) -> int:
    channels, code = _stream_channels(args)
    if channels is None:
        return code
    try:
        candidates = [channels[args.channel]] if args.channel else channels.persistent()
        if args.action == "list":
            for ch in candidates:
                for rec in ch.list_streams():
                    print(f"{rec.id}\t{ch.name}\t{_span(rec.calculated_intervals)}")
            return EXIT_OK
        try:
            sid = StreamId.parse(args.stream_id)
        except InvalidName as exc:
            _err(str(exc))
            return EXIT_USAGE
        matches = [ch for ch in candidates if ch.has_stream(sid)]
        if not matches:
            _err(f"UnknownStream: {sid}")
            return EXIT_INVALID
        ch = matches[0]
        if args.action == "intervals":
            ledger = ch.get_record(sid).calculated_intervals
            print(ledger if ledger else "{}")
        else:
            ch.purge(sid)
            print(f"purged {sid} in {ch.name}")
        return EXIT_OK
    except (UnknownChannel, UnknownStream) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID
    except StreamflowError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID
    finally:
        channels.close()


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="streamflow", description="Streaming workflow engine")
    parser.add_argument("--home", help="data root (default: $STREAMFLOW_HOME or ~/.streamflow)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a workflow definition")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="compute a workflow offline")
    p.add_argument("path")
    p.add_argument("--start", help="RFC 3339 start (exclusive); overrides the file's intervals")
    p.add_argument("--end", help="RFC 3339 end (inclusive)")
    p.add_argument("--parallel", action="store_true", help="run plate values of a factor in parallel")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="run online workflows until interrupted")
    p.add_argument("paths", nargs="+")
    p.add_argument("--poll", default="1s", help="poll period, e.g. 100ms (default 1s)")
    p.add_argument("--lag", default="5s", help="watermark lag (default 5s)")
    p.add_argument("--log-level", default="warning")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("streams", help="inspect persisted streams")
    p.add_argument("--definition", help="take channel configuration from this definition file")
    p.add_argument("--channel", help="restrict to one channel")
    ssub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    ssub.add_parser("list")
    for action in ("intervals", "purge"):
        sp = ssub.add_parser(action)
        sp.add_argument("stream_id")
    p.set_defaults(func=cmd_streams)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
