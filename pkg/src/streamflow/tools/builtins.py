"""Built-in tools."""
from __future__ import annotations

import csv
import math
import re
from datetime import datetime, timezone

from ..errors import ExternalResourceUnavailable, InvalidInput, ParameterInvalid, ParseFailure, SplitKeyMissing
from ..errors import TimestampError
from ..stream import StreamInstance
from ..timeline import format_timestamp, from_datetime, parse_timestamp
from .base import Param, Tool

_NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def ticks(interval, stride: int):
    """Epoch-aligned multiples of ``stride`` inside ``(start, end]``."""
    t = (interval.start // stride + 1) * stride
    while t <= interval.end:
        yield t
        t += stride


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _numbers(values, tool):
    for v in values:
        if not _is_number(v):
            raise InvalidInput(f"{tool}: expected a number, got {v!r}")
    return values


def _mean(xs):
    return math.fsum(xs) / len(xs)


AGGREGATES = {
    "mean": _mean,
    "max": max,
    "min": min,
    "count": len,
    "sum": math.fsum,
}


class Clock(Tool):
    """Emits a tick at every multiple of ``stride``; the value is the tick time in ms."""

    name = "clock"
    n_sources = 0
    params = {"stride": Param("duration")}

    def check_params(self, p):
        if p["stride"] <= 0:
            raise ParameterInvalid("clock: stride must be positive")

    def compute(self, p, sources, interval, context):
        for t in ticks(interval, p["stride"]):
            yield StreamInstance(t, t)


class CsvImport(Tool):
    """Reads rows of an RFC 4180 CSV file whose timestamp falls in the interval.

    Each row becomes one document: by default the list of the remaining
    cells as floats (blank cells skipped), or with ``as_record`` a map from
    column name to cell, numeric cells as floats and blank cells as null.
    ``path`` may hold ``{key}`` placeholders filled from the plate assignment.
    """

    name = "csv_import"
    n_sources = 0
    params = {
        "path": Param("string"),
        "time_column": Param("string", "time"),
        "time_format": Param("string", "iso"),
        "as_record": Param("boolean", False),
        "delimiter": Param("string", ","),
    }

    def _parse_time(self, text, fmt):
        if fmt == "iso":
            s = text.strip()
            if not re.search(r"([zZ]|[+-]\d\d:\d\d)$", s):
                s += "Z"
            if " " in s and "T" not in s:
                s = s.replace(" ", "T", 1)
            return parse_timestamp(s)
        if fmt == "epoch_ms":
            return int(text)
        if fmt == "epoch_s":
            return parse_timestamp(datetime.fromtimestamp(float(text), tz=timezone.utc))
        dt = datetime.strptime(text.strip(), fmt)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return from_datetime(dt)

    def load(self, p, context):
        path = context.resolve_path(p["path"])
        try:
            f = open(path, newline="", encoding="utf-8")
        except OSError as exc:
            raise ExternalResourceUnavailable(f"csv_import: cannot open {path}: {exc}") from None
        rows = []
        with f:
            reader = csv.reader(f, delimiter=p["delimiter"], strict=True)
            try:
                header = next(reader)
            except StopIteration:
                return rows
            except csv.Error as exc:
                raise ParseFailure(f"{path}:line 1", str(exc)) from None
            if p["time_column"] not in header:
                raise ParseFailure(f"{path}:line 1", f"no column {p['time_column']!r} in header")
            tcol = header.index(p["time_column"])
            seen = set()
            while True:
                try:
                    row = next(reader)
                except StopIteration:
                    break
                except csv.Error as exc:
                    raise ParseFailure(f"{path}:line {reader.line_num}", str(exc)) from None
                locus = f"{path}:line {reader.line_num}"
                if not row:
                    continue
                if len(row) != len(header):
                    raise ParseFailure(locus, f"expected {len(header)} fields, got {len(row)}")
                try:
                    t = self._parse_time(row[tcol], p["time_format"])
                except (ValueError, TimestampError) as exc:
                    raise ParseFailure(locus, f"bad timestamp {row[tcol]!r}: {exc}") from None
                if t in seen:
                    raise ParseFailure(locus, f"duplicate timestamp {format_timestamp(t)}")
                seen.add(t)
                cells = [(h, c) for i, (h, c) in enumerate(zip(header, row)) if i != tcol]
                if p["as_record"]:
                    value = {h: (float(c) if _NUMBER_RE.match(c.strip()) else (c if c.strip() else None))
                             for h, c in cells}
                else:
                    value = []
                    for h, c in cells:
                        if not c.strip():
                            continue
                        if not _NUMBER_RE.match(c.strip()):
                            raise ParseFailure(locus, f"column {h!r}: {c!r} is not a number")
                        value.append(float(c))
                rows.append(StreamInstance(t, value))
        rows.sort(key=lambda i: i.timestamp)
        return rows

    def compute(self, p, sources, interval, context):
        for inst in self.load(p, context):
            if inst.timestamp in interval:
                yield inst


class SumList(Tool):
    """Sum of a list of numbers, per document.  The empty list sums to 0.0."""

    name = "sum_list"
    params = {}

    def compute(self, p, sources, interval, context):
        for t, value in sources[0]:
            if t not in interval:
                continue
            if not isinstance(value, list):
                raise InvalidInput(f"sum_list: document at {t} is not a list")
            yield StreamInstance(t, math.fsum(_numbers(value, self.name)))


class SlidingWindow(Tool):
    """Emits the window ``(t - width, t]`` at each stride tick ``t``."""

    name = "sliding_window"
    n_sources = 0
    params = {"width": Param("duration"), "stride": Param("duration")}

    def check_params(self, p):
        if p["width"] <= 0 or p["stride"] <= 0:
            raise ParameterInvalid("sliding_window: width and stride must be positive")

    def compute(self, p, sources, interval, context):
        for t in ticks(interval, p["stride"]):
            yield StreamInstance(t, {"start": format_timestamp(t - p["width"]), "end": format_timestamp(t)})


class SlidingApply(Tool):
    """Aggregates source values over ``(t - width, t]`` at each stride tick ``t``.

    ``stride`` defaults to ``width``.  Null values are ignored; a window
    without values yields a null document instead of being skipped.  With
    ``field`` set, documents are maps and that field is aggregated.
    """

    name = "sliding_apply"
    params = {
        "width": Param("duration"),
        "aggregate": Param("string", "mean", choices=tuple(AGGREGATES)),
        "stride": Param("duration", None, nullable=True),
        "field": Param("string", None, nullable=True),
    }

    def check_params(self, p):
        if p["width"] <= 0 or (p["stride"] is not None and p["stride"] <= 0):
            raise ParameterInvalid("sliding_apply: width and stride must be positive")

    def lookback(self, p):
        return p["width"]

    def _project(self, value, field):
        if field is None:
            return value
        if not isinstance(value, dict):
            raise InvalidInput(f"sliding_apply: document {value!r} is not a map")
        return value.get(field)

    def compute(self, p, sources, interval, context):
        width = p["width"]
        stride = p["stride"] or width
        agg = AGGREGATES[p["aggregate"]]
        points = [(t, self._project(v, p["field"])) for t, v in sources[0]]
        points = [(t, v) for t, v in points if v is not None]
        _numbers([v for _, v in points], self.name)
        lo = hi = 0
        for t in ticks(interval, stride):
            while hi < len(points) and points[hi][0] <= t:
                hi += 1
            while lo < hi and points[lo][0] <= t - width:
                lo += 1
            window = [v for _, v in points[lo:hi]]
            yield StreamInstance(t, agg(window) if window else None)


class Component(Tool):
    """Projects one field out of map documents; documents without it are dropped."""

    name = "component"
    params = {"field": Param("string")}

    def compute(self, p, sources, interval, context):
        for t, value in sources[0]:
            if t not in interval:
                continue
            if not isinstance(value, dict):
                raise InvalidInput(f"component: document at {t} is not a map")
            if p["field"] in value:
                yield StreamInstance(t, value[p["field"]])


class Splitter(Tool):
    """Partitions map documents by ``key_field`` onto the ``output_key`` sub-plate.

    The split field is removed from each forwarded document.
    """

    name = "splitter"
    multi_output = True
    params = {"key_field": Param("string"), "output_key": Param("string")}

    def compute_multi(self, p, sources, interval, context):
        key = p["key_field"]
        for t, value in sources[0]:
            if t not in interval:
                continue
            if not isinstance(value, dict):
                raise InvalidInput(f"splitter: document at {t} is not a map")
            if key not in value:
                raise SplitKeyMissing(f"splitter: document at {format_timestamp(t)} has no {key!r}")
            ident = value[key]
            if isinstance(ident, bool) or not isinstance(ident, (str, int)):
                raise InvalidInput(f"splitter: {key!r} at {t} is not a string or integer")
            rest = {k: v for k, v in value.items() if k != key}
            yield str(ident), StreamInstance(t, rest)


BUILTINS = (Clock, CsvImport, SumList, SlidingWindow, SlidingApply, Component, Splitter)
